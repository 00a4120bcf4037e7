"""High-level feature path: a stride-32 backbone with alignment-preserving
padding, 1x1 channel compression, exact x32 nearest-neighbor upscaling, and
a dilated-inception context block for the ROI path.

Every resolution-reducing stage pads so the total stride is exactly 32 with
no residual cropping: a (M, N) input yields an (M/32, N/32) grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .local_iqa import he_init

TOY_STAGE_CHANNELS = (16, 32, 64, 128, 256)
EMBED_CHANNELS = 64
BACKBONE_STRIDE = 32

BACKBONE_VARIANTS = ("toy", "pretrained")


class BackboneWeightsError(RuntimeError):
    """Pretrained backbone weights are missing or malformed."""


@dataclass(frozen=True)
class DimConfig:
    """Dilation rates for the three dilated branches of the context block."""

    alpha: int = 2
    beta: int = 4
    gamma: int = 8

    def __post_init__(self):
        if not 0 < self.alpha < self.beta < self.gamma:
            raise ValueError(f"dilation rates must satisfy 0 < alpha < beta < gamma, "
                             f"got ({self.alpha}, {self.beta}, {self.gamma})")

    @property
    def rates(self) -> tuple[int, int, int]:
        return (self.alpha, self.beta, self.gamma)


def _check_divisible(x: torch.Tensor) -> None:
    h, w = x.shape[-2], x.shape[-1]
    if h % BACKBONE_STRIDE or w % BACKBONE_STRIDE:
        raise ValueError(f"backbone input dims must be divisible by {BACKBONE_STRIDE}, "
                         f"got {w}x{h}; pad the image first")


class ToyBackbone(nn.Module):
    """Five stride-2 conv stages; desk-scale stand-in for a large pretrained net.

    Shares the stride-32 contract of the real thing: kernel 3, stride 2,
    padding 1 each stage, so spatial dims halve exactly five times.
    """

    def __init__(self, in_channels: int = 3, stage_channels=TOY_STAGE_CHANNELS):
        super().__init__()
        layers = []
        c = in_channels
        for oc in stage_channels:
            layers += [nn.Conv2d(c, oc, kernel_size=3, stride=2, padding=1),
                       nn.BatchNorm2d(oc),
                       nn.ReLU(inplace=True)]
            c = oc
        self.stages = nn.Sequential(*layers)
        self.out_channels = c
        he_init(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_divisible(x)
        return self.stages(x)


def save_backbone_weights(backbone: ToyBackbone, path) -> None:
    """Persist backbone weights in the external-weights file format."""
    payload = {
        "format": "piqa-backbone-v1",
        "stage_channels": tuple(int(c) for c in TOY_STAGE_CHANNELS),
        "state_dict": backbone.state_dict(),
    }
    torch.save(payload, path)


def load_pretrained_backbone(weights_path) -> ToyBackbone:
    """Build the backbone from an external weights file.

    Missing files are a startup error; the loaded network honors the same
    stride-32 output contract as the toy variant.
    """
    path = Path(weights_path) if weights_path is not None else None
    if path is None:
        raise BackboneWeightsError("backbone variant 'pretrained' requires a weights path")
    if not path.is_file():
        raise BackboneWeightsError(f"backbone weights file not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != "piqa-backbone-v1":
        raise BackboneWeightsError(f"unrecognized backbone weights file: {path}")
    backbone = ToyBackbone(stage_channels=tuple(payload["stage_channels"]))
    backbone.load_state_dict(payload["state_dict"])
    return backbone


def build_backbone(variant: str = "toy", weights_path=None) -> ToyBackbone:
    if variant == "toy":
        return ToyBackbone()
    if variant == "pretrained":
        return load_pretrained_backbone(weights_path)
    raise ValueError(f"unknown backbone variant {variant!r}; expected one of {BACKBONE_VARIANTS}")


class ChannelCompressor(nn.Module):
    """1x1 conv shrinking the wide backbone channels before embedding."""

    def __init__(self, in_channels: int, out_channels: int = EMBED_CHANNELS):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size=1)
        self.out_channels = out_channels
        he_init(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


def upscale_x32(feats: torch.Tensor) -> torch.Tensor:
    """Nearest-neighbor x32 upscale: each cell replicated over a 32x32 block."""
    return F.interpolate(feats, scale_factor=BACKBONE_STRIDE, mode="nearest")


class DilatedInception(nn.Module):
    """Context block: four parallel branches (one 1x1 conv and three 3x3
    convs at increasing dilation rates), channel-concatenated and fused by a
    1x1 conv. Spatial dims are preserved by zero-padding each branch.

    With the default rates the widest branch sees a 17x17 cell window, which
    at 1/32 resolution covers most of the image.
    """

    def __init__(self, in_channels: int, out_channels: int = EMBED_CHANNELS,
                 rates: tuple[int, int, int] = (2, 4, 8)):
        super().__init__()
        branch_channels = out_channels // 4
        self.branch0 = nn.Conv2d(in_channels, branch_channels, kernel_size=1)
        self.dilated = nn.ModuleList([
            nn.Conv2d(in_channels, branch_channels, kernel_size=3, padding=r, dilation=r)
            for r in rates
        ])
        self.fuse = nn.Conv2d(4 * branch_channels, out_channels, kernel_size=1)
        self.relu = nn.ReLU(inplace=True)
        self.rates = tuple(rates)
        self.out_channels = out_channels
        he_init(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        branches = [self.branch0(x)] + [conv(x) for conv in self.dilated]
        return self.relu(self.fuse(self.relu(torch.cat(branches, dim=1))))
