"""Region-of-interest weighting: an unsupervised head predicting non-negative
per-pixel importance logits, plus the normalizers turning logits into weight
maps that sum to one.

Linear normalization (dividing by the sum) is the default; softmax is kept
selectable for comparison.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .local_iqa import HEAD_HIDDEN, he_init

UNIFORM_FALLBACK_EPS = 1e-6

NORMALIZE_MODES = ("linear", "softmax")


class RoiRegressionHead(nn.Module):
    """Same 1x1-conv stack as the MOS head, without dropout.

    A final ReLU keeps logits non-negative so that dividing by their sum is
    well defined.
    """

    def __init__(self, in_channels: int, hidden=HEAD_HIDDEN):
        super().__init__()
        h1, h2 = hidden
        self.conv1 = nn.Conv2d(in_channels, h1, kernel_size=1)
        self.conv2 = nn.Conv2d(h1, h2, kernel_size=1)
        self.conv3 = nn.Conv2d(h2, 1, kernel_size=1)
        self.relu = nn.ReLU(inplace=True)
        he_init(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.relu(self.conv1(x))
        x = self.relu(self.conv2(x))
        return self.relu(self.conv3(x))


def _spatial_sum(x: torch.Tensor) -> torch.Tensor:
    return x.sum(dim=(-2, -1), keepdim=True)


def linear_normalize(logits: torch.Tensor, eps: float = UNIFORM_FALLBACK_EPS) -> torch.Tensor:
    """Divide non-negative logits by their spatial sum.

    Samples whose total mass is at most ``eps`` fall back to the uniform
    map 1/(M*N) instead of blowing up the division. Negative logits are a
    contract violation and raise.
    """
    if (logits < 0).any():
        raise ValueError("linear_normalize requires non-negative logits")
    total = _spatial_sum(logits)
    n_pix = logits.shape[-2] * logits.shape[-1]
    uniform = torch.full_like(logits, 1.0 / n_pix)
    safe_total = torch.where(total > eps, total, torch.ones_like(total))
    return torch.where(total > eps, logits / safe_total, uniform)


def softmax_normalize(logits: torch.Tensor) -> torch.Tensor:
    """Spatial softmax with max-subtraction for numerical stability."""
    flat_max = logits.amax(dim=(-2, -1), keepdim=True)
    e = torch.exp(logits - flat_max)
    return e / _spatial_sum(e)


def normalize_roi(logits: torch.Tensor, mode: str = "linear") -> torch.Tensor:
    if mode == "linear":
        return linear_normalize(logits)
    if mode == "softmax":
        return softmax_normalize(logits)
    raise ValueError(f"unknown ROI normalization mode {mode!r}; expected one of {NORMALIZE_MODES}")


def uniform_roi_like(pmos: torch.Tensor) -> torch.Tensor:
    """Uniform weight map matching a pMOS map; used when no ROI head exists."""
    n_pix = pmos.shape[-2] * pmos.shape[-1]
    return torch.full_like(pmos, 1.0 / n_pix)
