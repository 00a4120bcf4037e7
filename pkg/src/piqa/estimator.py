"""Scikit-learn style wrapper around the pixel-wise IQA network.

``PIQAScorer`` exposes the usual fit/predict surface (plus ``get_params`` /
``set_params`` / ``clone`` compatibility) so the model composes with
pipelines, grid search and other ecosystem tooling. X is a batch of RGB
images, y the MOS targets.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .config import DEFAULT_STAGES, TrainConfig
from .data import ArraySample
from .model import predict_maps, predict_score
from .training import evaluate_model, load_checkpoint, save_checkpoint, train
from .validation import as_image_list, check_targets


class PIQAScorer(RegressorMixin, BaseEstimator):
    """No-reference image quality regressor with per-pixel quality maps.

    Parameters mirror the training configuration; see TrainConfig. After
    ``fit``, ``predict`` returns image-level MOS estimates and
    ``predict_maps`` the per-pixel quality and region-weight maps.
    """

    def __init__(self, stages=DEFAULT_STAGES, batch_size=8, loss_form="ms",
                 score_form="auto", roi_normalize="linear", use_roi=True,
                 use_highlevel=True, use_dim=True, dim_rates=(2, 4, 8),
                 backbone_variant="toy", backbone_weights=None,
                 local_channels=32, embed_channels=64, dropout=0.25,
                 augment=True, seed=0, runs_dir=None, run_name="estimator"):
        self.stages = stages
        self.batch_size = batch_size
        self.loss_form = loss_form
        self.score_form = score_form
        self.roi_normalize = roi_normalize
        self.use_roi = use_roi
        self.use_highlevel = use_highlevel
        self.use_dim = use_dim
        self.dim_rates = dim_rates
        self.backbone_variant = backbone_variant
        self.backbone_weights = backbone_weights
        self.local_channels = local_channels
        self.embed_channels = embed_channels
        self.dropout = dropout
        self.augment = augment
        self.seed = seed
        self.runs_dir = runs_dir
        self.run_name = run_name

    def _make_config(self) -> TrainConfig:
        return TrainConfig(
            name=self.run_name,
            stages=tuple(tuple(stage) for stage in self.stages),
            batch_size=self.batch_size,
            loss_form=self.loss_form,
            score_form=self.score_form,
            roi_normalize=self.roi_normalize,
            use_roi=self.use_roi,
            use_highlevel=self.use_highlevel,
            use_dim=self.use_dim,
            dim_rates=tuple(self.dim_rates),
            backbone_variant=self.backbone_variant,
            backbone_weights=self.backbone_weights,
            local_channels=self.local_channels,
            embed_channels=self.embed_channels,
            dropout=self.dropout,
            augment=self.augment,
            seed=self.seed,
        ).validate()

    @staticmethod
    def _samples(X, y=None) -> list[ArraySample]:
        images = as_image_list(X)
        if y is None:
            return [ArraySample(img, 0.0) for img in images]
        targets = check_targets(y, len(images))
        return [ArraySample(img, float(t)) for img, t in zip(images, targets)]

    def fit(self, X, y, eval_set=None, max_steps=None):
        """Train on images X with MOS targets y.

        ``eval_set=(X_test, y_test)`` enables per-epoch metric history;
        ``max_steps`` caps optimizer steps for quick runs.
        """
        config = self._make_config()
        train_samples = self._samples(X, y)
        test_samples = self._samples(*eval_set) if eval_set is not None else None
        result = train(config, train_samples, test_samples=test_samples,
                       runs_dir=self.runs_dir, max_steps=max_steps)
        self.net_ = result.net
        self.config_ = config
        self.history_ = result.history
        self.n_images_ = len(train_samples)
        return self

    def predict(self, X) -> np.ndarray:
        """Image-level MOS estimates, one per input image."""
        check_is_fitted(self, "net_")
        form = self.config_.resolved_score_form
        return np.asarray([
            predict_score(self.net_, img, form=form).value for img in as_image_list(X)
        ])

    def predict_maps(self, X) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-pixel (quality map, weight map) pairs at input resolution."""
        check_is_fitted(self, "net_")
        return [predict_maps(self.net_, img) for img in as_image_list(X)]

    def evaluate(self, X, y):
        """PLCC/SRCC/RMSE report over a labelled image set."""
        check_is_fitted(self, "net_")
        report, _, _ = evaluate_model(self.net_, self._samples(X, y),
                                      self.config_.resolved_score_form,
                                      batch_size=self.batch_size)
        return report

    def save_checkpoint(self, ckpt_dir):
        check_is_fitted(self, "net_")
        return save_checkpoint(ckpt_dir, self.net_, None, self.config_,
                               self.history_, epoch=self.config_.total_epochs)

    @classmethod
    def from_checkpoint(cls, ckpt_dir) -> "PIQAScorer":
        """Rebuild a fitted scorer from a checkpoint directory."""
        net, config, history, _ = load_checkpoint(ckpt_dir)
        scorer = cls(
            stages=config.stages, batch_size=config.batch_size,
            loss_form=config.loss_form, score_form=config.score_form,
            roi_normalize=config.roi_normalize, use_roi=config.use_roi,
            use_highlevel=config.use_highlevel, use_dim=config.use_dim,
            dim_rates=config.dim_rates, backbone_variant=config.backbone_variant,
            backbone_weights=config.backbone_weights,
            local_channels=config.local_channels, embed_channels=config.embed_channels,
            dropout=config.dropout, augment=config.augment, seed=config.seed,
            run_name=config.name,
        )
        scorer.net_ = net
        scorer.config_ = config
        scorer.history_ = history
        scorer.n_images_ = 0
        return scorer
