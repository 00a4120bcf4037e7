"""Pixel-wise no-reference image quality assessment.

A fully-convolutional network predicts a per-pixel quality map (pMOS) at
input resolution plus an unsupervised region-weight map; the image-level
MOS is their weighted sum. ``PIQAScorer`` is the scikit-learn style entry
point; the ``piqa`` CLI wraps dataset preparation, training, evaluation,
prediction and map export.
"""

from .aggregation import (
    QualityScore,
    aggregate,
    aggregate_mean_shifted,
    l1_loss,
    pad_to_multiple_32,
)
from .config import TrainConfig
from .data import DatasetRecord, SplitSpec, load_manifest, make_synthetic_dataset
from .estimator import PIQAScorer
from .metrics import EvalReport, evaluate, plcc, rmse, srcc
from .model import PIQANet, build_network, predict_maps, predict_score
from .roi_head import linear_normalize, softmax_normalize
from .training import ablation_matrix, load_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "DatasetRecord",
    "EvalReport",
    "PIQANet",
    "PIQAScorer",
    "QualityScore",
    "SplitSpec",
    "TrainConfig",
    "ablation_matrix",
    "aggregate",
    "aggregate_mean_shifted",
    "build_network",
    "evaluate",
    "l1_loss",
    "linear_normalize",
    "load_checkpoint",
    "load_manifest",
    "make_synthetic_dataset",
    "pad_to_multiple_32",
    "plcc",
    "predict_maps",
    "predict_score",
    "rmse",
    "softmax_normalize",
    "srcc",
    "train",
]
