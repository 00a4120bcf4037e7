"""Assembled pixel-wise IQA network.

Three paths share one backbone forward per image:
  * local path: 7x 3x3 extractor -> MOS regression head -> pMOS map
  * embedding path: backbone -> 1x1 compression -> x32 nearest upscale,
    concatenated with local features before the MOS head
  * ROI path: backbone -> dilated-inception context -> x32 upscale,
    concatenated with local features before the ROI head

Checkpoint namespaces follow the submodule names: ``local_iqa.*``,
``roi_head.*``, ``backbone.*``, ``dim.*``, ``compress.*``.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from . import aggregation
from .backbone import (
    EMBED_CHANNELS,
    ChannelCompressor,
    DilatedInception,
    build_backbone,
    upscale_x32,
)
from .local_iqa import DROPOUT_RATE, HEAD_HIDDEN, LOCAL_CHANNELS, LocalIQA
from .roi_head import RoiRegressionHead, normalize_roi, uniform_roi_like
from .validation import image_to_tensor


class PIQANet(nn.Module):
    """Full network emitting a pMOS map and an ROI weight map per image."""

    def __init__(self, use_roi: bool = True, use_highlevel: bool = True,
                 dim_rates: tuple[int, int, int] = (2, 4, 8),
                 roi_normalize: str = "linear",
                 local_channels: int = LOCAL_CHANNELS,
                 embed_channels: int = EMBED_CHANNELS,
                 head_hidden=HEAD_HIDDEN, dropout: float = DROPOUT_RATE,
                 backbone_variant: str = "toy", backbone_weights=None):
        super().__init__()
        self.use_roi = use_roi
        self.use_highlevel = use_highlevel
        self.roi_normalize = roi_normalize
        self.arch = {
            "use_roi": use_roi,
            "use_highlevel": use_highlevel,
            "dim_rates": tuple(dim_rates),
            "roi_normalize": roi_normalize,
            "local_channels": local_channels,
            "embed_channels": embed_channels,
            "head_hidden": tuple(head_hidden),
            "dropout": dropout,
            "backbone_variant": backbone_variant,
        }

        mos_embed = embed_channels if use_highlevel else 0
        self.local_iqa = LocalIQA(channels=local_channels, embed_channels=mos_embed,
                                  hidden=head_hidden, dropout=dropout)
        if use_highlevel:
            self.backbone = build_backbone(backbone_variant, backbone_weights)
            self.compress = ChannelCompressor(self.backbone.out_channels, embed_channels)
        if use_roi:
            roi_in = local_channels + (embed_channels if use_highlevel else 0)
            self.roi_head = RoiRegressionHead(roi_in, hidden=head_hidden)
            if use_highlevel:
                self.dim = DilatedInception(self.backbone.out_channels, embed_channels,
                                            rates=tuple(dim_rates))

    def forward(self, images: torch.Tensor, local_only: bool = False
                ) -> tuple[torch.Tensor, torch.Tensor]:
        """Run on an (N, 3, H, W) batch; returns (pmos, roi), both (N, 1, H, W).

        ``local_only`` zeroes the high-level context maps, isolating the
        local pathway without touching the architecture.
        """
        local_feats = self.local_iqa.extract(images)

        mos_context = roi_context = None
        if self.use_highlevel:
            high = self.backbone(images)
            mos_context = upscale_x32(self.compress(high))
            if self.use_roi:
                roi_context = upscale_x32(self.dim(high))
            if local_only:
                mos_context = torch.zeros_like(mos_context)
                if roi_context is not None:
                    roi_context = torch.zeros_like(roi_context)

        pmos = self.local_iqa.regress(local_feats, mos_context)

        if self.use_roi:
            roi_in = local_feats if roi_context is None else torch.cat([local_feats, roi_context], dim=1)
            logits = self.roi_head(roi_in)
            roi = normalize_roi(logits, self.roi_normalize)
        else:
            roi = uniform_roi_like(pmos)
        return pmos, roi


def build_network(config) -> PIQANet:
    """Construct a PIQANet from a TrainConfig-like object."""
    rates = config.dim_rates if config.use_dim else (1, 1, 1)
    return PIQANet(
        use_roi=config.use_roi,
        use_highlevel=config.use_highlevel,
        dim_rates=rates,
        roi_normalize=config.roi_normalize,
        local_channels=config.local_channels,
        embed_channels=config.embed_channels,
        dropout=config.dropout,
        backbone_variant=config.backbone_variant,
        backbone_weights=config.backbone_weights,
    )


def network_manifest(net: PIQANet) -> dict:
    """Parameter names (namespaced by submodule) mapped to their shapes."""
    return {name: list(tensor.shape) for name, tensor in net.state_dict().items()}


def forward_maps(net: PIQANet, images: torch.Tensor, local_only: bool = False
                 ) -> tuple[torch.Tensor, torch.Tensor]:
    """Forward with multiple-of-32 padding handled transparently.

    Output maps are cropped back to the input dims and the weight maps
    renormalized, so downstream sums run over the true image area only.
    The high-level path needs the padding; a local-only architecture runs
    at native resolution.
    """
    if net.use_highlevel:
        padded, record = aggregation.pad_to_multiple_32(images)
        pmos, roi = net(padded, local_only=local_only)
        pmos = aggregation.crop_to_record(pmos, record)
        roi = aggregation.renormalize_weights(aggregation.crop_to_record(roi, record))
        return pmos, roi
    return net(images, local_only=local_only)


@torch.no_grad()
def predict_maps(net: PIQANet, image, local_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode pMOS and ROI maps for one image, as (H, W) float arrays."""
    was_training = net.training
    net.eval()
    try:
        pmos, roi = forward_maps(net, image_to_tensor(image), local_only=local_only)
    finally:
        net.train(was_training)
    return pmos[0, 0].numpy(), roi[0, 0].numpy()


@torch.no_grad()
def predict_score(net: PIQANet, image, form: str = "mean_shifted",
                  local_only: bool = False) -> aggregation.QualityScore:
    """Eval-mode image-level score for one image."""
    pmos, roi = predict_maps(net, image, local_only=local_only)
    return aggregation.quality_score(torch.from_numpy(pmos), torch.from_numpy(roi), form=form)
