"""Correlation and error metrics for image-quality predictions.

PLCC measures linear accuracy, SRCC (tie-aware, average ranks) measures
monotonicity, RMSE measures absolute error in MOS units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np


class DegenerateInputError(ValueError):
    """A metric is undefined for the given vectors (e.g. constant input)."""


def _paired(pred, gt, min_len: int = 2) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=np.float64).ravel()
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {gt.shape[0]}")
    if pred.size < min_len:
        raise ValueError(f"need at least {min_len} values, got {pred.size}")
    if not (np.isfinite(pred).all() and np.isfinite(gt).all()):
        raise ValueError("inputs must be finite")
    return pred, gt


def plcc(pred, gt) -> float:
    """Sample Pearson linear correlation coefficient in [-1, 1]."""
    x, y = _paired(pred, gt)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateInputError("Pearson correlation is undefined for a constant vector")
    return float(np.clip((dx * dy).sum() / (sx * sy), -1.0, 1.0))


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their covered positions."""
    values = np.asarray(values, dtype=np.float64).ravel()
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def srcc(pred, gt) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    x, y = _paired(pred, gt)
    return plcc(average_ranks(x), average_ranks(y))


def rmse(pred, gt) -> float:
    """Root mean squared error, in the units of the inputs."""
    x, y = _paired(pred, gt, min_len=1)
    return float(np.sqrt(np.mean((x - y) ** 2)))


@dataclass
class EvalReport:
    """Metric bundle for one prediction/ground-truth vector pair."""

    plcc: float
    srcc: float
    rmse: float
    n: int
    mos_scale: str = "raw"
    degenerate: bool = False

    def as_dict(self) -> dict:
        return asdict(self)

    def as_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def as_table(self) -> str:
        rows = [("n", str(self.n)), ("plcc", f"{self.plcc:.6f}"), ("srcc", f"{self.srcc:.6f}"),
                ("rmse", f"{self.rmse:.6f}"), ("mos_scale", self.mos_scale)]
        if self.degenerate:
            rows.append(("degenerate", "true"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def evaluate(pred, gt, mos_scale: str = "raw") -> EvalReport:
    """Compute all three metrics; constant vectors flag the report as degenerate."""
    x, y = _paired(pred, gt)
    err = rmse(x, y)
    try:
        return EvalReport(plcc=plcc(x, y), srcc=srcc(x, y), rmse=err, n=x.size, mos_scale=mos_scale)
    except DegenerateInputError:
        return EvalReport(plcc=math.nan, srcc=math.nan, rmse=err, n=x.size,
                          mos_scale=mos_scale, degenerate=True)


def center_mass_share(weight_map, center_fraction: float = 0.25) -> float:
    """Weight share falling in a centered box covering the given area fraction.

    Used to quantify center bias of averaged region-weight maps.
    """
    w = np.asarray(weight_map, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {w.shape}")
    if not 0.0 < center_fraction <= 1.0:
        raise ValueError("center_fraction must be in (0, 1]")
    total = w.sum()
    if total <= 0.0:
        raise DegenerateInputError("weight map has non-positive total mass")
    h, width = w.shape
    side = math.sqrt(center_fraction)
    bh = max(1, int(round(side * h)))
    bw = max(1, int(round(side * width)))
    y0 = (h - bh) // 2
    x0 = (width - bw) // 2
    return float(w[y0:y0 + bh, x0:x0 + bw].sum() / total)
