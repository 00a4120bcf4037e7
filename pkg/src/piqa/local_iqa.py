"""Pixel-level quality head: a fully-convolutional local feature extractor
plus a 1x1-conv regression stack producing a per-pixel MOS (pMOS) map at the
exact input resolution.

No layer here strides, pools or otherwise reduces resolution, so the map at
pixel (i, j) depends only on a small neighbourhood of the input.
"""

from __future__ import annotations

import torch
import torch.nn as nn

LOCAL_CHANNELS = 32
HEAD_HIDDEN = (64, 32)
DROPOUT_RATE = 0.25

N_EXTRACTOR_LAYERS = 7
# Seven stacked 3x3 convolutions: Chebyshev radius 7, window 15x15.
RECEPTIVE_FIELD = 1 + 2 * N_EXTRACTOR_LAYERS


def he_init(module: nn.Module) -> None:
    """He fan-in normal init for convs; batch-norm gets gamma=1, beta=0."""
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


class LocalFeatureExtractor(nn.Module):
    """Seven 3x3 conv (stride 1, padding 1) + BN + ReLU layers.

    Output spatial dims equal input dims for any input of at least 1x1.
    """

    def __init__(self, in_channels: int = 3, channels: int = LOCAL_CHANNELS):
        super().__init__()
        layers = []
        c = in_channels
        for _ in range(N_EXTRACTOR_LAYERS):
            layers += [nn.Conv2d(c, channels, kernel_size=3, stride=1, padding=1),
                       nn.BatchNorm2d(channels),
                       nn.ReLU(inplace=True)]
            c = channels
        self.layers = nn.Sequential(*layers)
        self.out_channels = channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2] < 1 or x.shape[-1] < 1:
            raise ValueError(f"input dims must be at least 1x1, got {tuple(x.shape[-2:])}")
        return self.layers(x)


class MosRegressionHead(nn.Module):
    """1x1 conv -> ReLU -> dropout -> 1x1 conv -> ReLU -> 1x1 conv (linear).

    The final layer has no activation so the map can span the full MOS
    scale, including negative values after mean-shifting.
    """

    def __init__(self, in_channels: int, hidden=HEAD_HIDDEN, dropout: float = DROPOUT_RATE):
        super().__init__()
        h1, h2 = hidden
        self.conv1 = nn.Conv2d(in_channels, h1, kernel_size=1)
        self.dropout = nn.Dropout(dropout)
        self.conv2 = nn.Conv2d(h1, h2, kernel_size=1)
        self.conv3 = nn.Conv2d(h2, 1, kernel_size=1)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.dropout(self.relu(self.conv1(x)))
        x = self.relu(self.conv2(x))
        return self.conv3(x)


class LocalIQA(nn.Module):
    """Local feature extractor plus MOS regression head.

    ``embed_channels > 0`` reserves extra head input channels for an
    externally supplied context map, concatenated channel-wise with the
    local features before regression.
    """

    def __init__(self, in_channels: int = 3, channels: int = LOCAL_CHANNELS,
                 embed_channels: int = 0, hidden=HEAD_HIDDEN, dropout: float = DROPOUT_RATE):
        super().__init__()
        self.extractor = LocalFeatureExtractor(in_channels, channels)
        self.head = MosRegressionHead(channels + embed_channels, hidden, dropout)
        self.embed_channels = embed_channels
        he_init(self)

    def extract(self, img: torch.Tensor) -> torch.Tensor:
        return self.extractor(img)

    def regress(self, local_feats: torch.Tensor, embedded: torch.Tensor | None = None) -> torch.Tensor:
        if embedded is not None:
            if embedded.shape[-2:] != local_feats.shape[-2:]:
                raise ValueError(
                    f"embedded context dims {tuple(embedded.shape[-2:])} do not match "
                    f"local feature dims {tuple(local_feats.shape[-2:])}")
            local_feats = torch.cat([local_feats, embedded], dim=1)
        return self.head(local_feats)

    def forward(self, img: torch.Tensor, embedded: torch.Tensor | None = None) -> torch.Tensor:
        return self.regress(self.extract(img), embedded)

    def conv_layer_count(self) -> int:
        return sum(1 for m in self.modules() if isinstance(m, nn.Conv2d))
