"""Image-level score aggregation and training losses.

The image score is a weighted sum of the per-pixel quality map with the
region weights: plain form P = sum(p * r), or the mean-shifted form
P_ms = sum((p - mean(p)) * r), which removes the map's spatial mean so the
weight head's learning signal does not scale with the absolute MOS level.
Training minimizes the L1 distance between the score and the ground truth.

Also houses the multiple-of-32 padding bookkeeping required by the
stride-32 high-level path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .roi_head import UNIFORM_FALLBACK_EPS

SCORE_FORMS = ("plain", "mean_shifted")
PAD_MULTIPLE = 32


@dataclass(frozen=True)
class QualityScore:
    """Scalar image-level prediction, tagged with the aggregation form used."""

    value: float
    form: str

    def __post_init__(self):
        if self.form not in SCORE_FORMS:
            raise ValueError(f"unknown score form {self.form!r}; expected one of {SCORE_FORMS}")
        if not math.isfinite(self.value):
            raise ValueError(f"quality score must be finite, got {self.value}")


def _check_pair(pmos: torch.Tensor, weights: torch.Tensor) -> None:
    if pmos.shape != weights.shape:
        raise ValueError(f"pMOS shape {tuple(pmos.shape)} does not match "
                         f"weight shape {tuple(weights.shape)}")


def _spatial_dims(x: torch.Tensor) -> tuple[int, ...]:
    # (H, W) maps reduce to a scalar; anything higher-rank keeps the batch dim.
    return tuple(range(1, x.dim())) if x.dim() > 2 else (0, 1)


def aggregate(pmos: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Weighted sum P = sum(p * r); weights are assumed to sum to one."""
    _check_pair(pmos, weights)
    return (pmos * weights).sum(dim=_spatial_dims(pmos))


def aggregate_mean_shifted(pmos: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Mean-shifted weighted sum P_ms = sum((p - mean(p)) * r)."""
    _check_pair(pmos, weights)
    dims = _spatial_dims(pmos)
    mean = pmos.mean(dim=dims, keepdim=True)
    return ((pmos - mean) * weights).sum(dim=dims)


def aggregate_scores(pmos: torch.Tensor, weights: torch.Tensor, form: str) -> torch.Tensor:
    if form == "plain":
        return aggregate(pmos, weights)
    if form == "mean_shifted":
        return aggregate_mean_shifted(pmos, weights)
    raise ValueError(f"unknown score form {form!r}; expected one of {SCORE_FORMS}")


def quality_score(pmos: torch.Tensor, weights: torch.Tensor, form: str = "mean_shifted") -> QualityScore:
    """Single-image convenience wrapper returning a tagged QualityScore."""
    value = aggregate_scores(pmos, weights, form)
    if value.numel() != 1:
        raise ValueError("quality_score expects a single image; use aggregate_scores for batches")
    return QualityScore(value=float(value), form=form)


def l1_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error |P - G|; the subgradient at zero is zero."""
    return (pred - target).abs().mean()


# ---------------------------------------------------------------------------
# Multiple-of-32 padding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CropRecord:
    """Remembers original dims so output maps can be cropped back."""

    height: int
    width: int
    pad_bottom: int
    pad_right: int

    @property
    def is_empty(self) -> bool:
        return self.pad_bottom == 0 and self.pad_right == 0


def pad_to_multiple_32(images: torch.Tensor) -> tuple[torch.Tensor, CropRecord]:
    """Pad an (N, C, H, W) batch on the bottom/right to multiples of 32.

    Reflect padding, falling back to replicate when a side is shorter than
    the padding it needs (reflect requires pad < dim).
    """
    h, w = images.shape[-2], images.shape[-1]
    pad_b = (-h) % PAD_MULTIPLE
    pad_r = (-w) % PAD_MULTIPLE
    record = CropRecord(height=h, width=w, pad_bottom=pad_b, pad_right=pad_r)
    if record.is_empty:
        return images, record
    mode = "reflect" if pad_b < h and pad_r < w else "replicate"
    return F.pad(images, (0, pad_r, 0, pad_b), mode=mode), record


def crop_to_record(feature_map: torch.Tensor, record: CropRecord) -> torch.Tensor:
    """Crop padded output maps back to the original image dims."""
    if record.is_empty:
        return feature_map
    return feature_map[..., :record.height, :record.width]


def renormalize_weights(weights: torch.Tensor, eps: float = UNIFORM_FALLBACK_EPS) -> torch.Tensor:
    """Rescale cropped weight maps to sum to one again.

    Padding must not leak weight mass outside the true image, so this runs
    after every crop. Degenerate all-zero maps fall back to uniform.
    """
    dims = _spatial_dims(weights)
    total = weights.sum(dim=dims, keepdim=True)
    n_pix = weights.shape[-2] * weights.shape[-1]
    uniform = torch.full_like(weights, 1.0 / n_pix)
    safe = torch.where(total > eps, total, torch.ones_like(total))
    return torch.where(total > eps, weights / safe, uniform)
