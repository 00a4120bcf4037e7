"""Training orchestration: staged Adam schedule, augmentation, per-epoch
evaluation, checkpointing and the ablation matrix.

Determinism contract: given the same config, data and single-process
execution, two runs produce identical loss sequences.
"""

from __future__ import annotations

import csv
import json
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from . import aggregation
from .backbone import BackboneWeightsError
from .config import TrainConfig, parse_stages
from .data import ArraySample, augment
from .metrics import EvalReport, evaluate
from .model import PIQANet, build_network, forward_maps, network_manifest

HISTORY_COLUMNS = ("epoch", "loss", "plcc", "srcc", "rmse")


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries the location and recent loss trace."""

    def __init__(self, epoch: int, batch_index: int, loss_trace: list[float]):
        self.epoch = epoch
        self.batch_index = batch_index
        self.loss_trace = loss_trace
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index}; "
            f"recent losses: {[f'{v:.4g}' for v in loss_trace]}")


@dataclass
class TrainResult:
    """Everything a finished (or checkpointed) run exposes."""

    net: PIQANet
    config: TrainConfig
    history: list[dict] = field(default_factory=list)
    lr_by_step: list[float] = field(default_factory=list)
    checkpoint_dir: Path | None = None
    report: EvalReport | None = None


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)


def default_runs_dir() -> Path:
    return Path(os.environ.get("PIQA_RUNS_DIR", "runs"))


def _check_samples(samples: Sequence[ArraySample], what: str) -> tuple[int, int]:
    if not samples:
        raise ValueError(f"{what} set is empty")
    dims = {s.image.shape[:2] for s in samples}
    if len(dims) != 1:
        raise ValueError(f"{what} images must share dimensions within a run, got {sorted(dims)}")
    return dims.pop()


def _batch_tensor(samples: Sequence[ArraySample], indices, rng=None, augment_data=False):
    images = []
    targets = []
    for i in indices:
        img = samples[i].image
        if augment_data:
            img = augment(img, rng)
        images.append(img.transpose(2, 0, 1))
        targets.append(samples[i].mos)
    batch = torch.from_numpy(np.ascontiguousarray(np.stack(images), dtype=np.float32))
    return batch, torch.tensor(targets, dtype=torch.float32)


def batch_scores(net: PIQANet, images: torch.Tensor, form: str,
                 local_only: bool = False) -> torch.Tensor:
    """Per-sample image scores for a batch, padding handled."""
    pmos, roi = forward_maps(net, images, local_only=local_only)
    return aggregation.aggregate_scores(pmos, roi, form)


@torch.no_grad()
def evaluate_model(net: PIQANet, samples: Sequence[ArraySample], score_form: str,
                   batch_size: int = 16, mos_scale: str = "raw",
                   local_only: bool = False) -> tuple[EvalReport, np.ndarray, np.ndarray]:
    """Eval-mode predictions and metrics over a sample set."""
    _check_samples(samples, "eval")
    was_training = net.training
    net.eval()
    preds = []
    gts = []
    try:
        for start in range(0, len(samples), batch_size):
            chunk = range(start, min(start + batch_size, len(samples)))
            images, targets = _batch_tensor(samples, chunk)
            scores = batch_scores(net, images, score_form)
            preds.extend(scores.tolist())
            gts.extend(targets.tolist())
    finally:
        net.train(was_training)
    preds_arr = np.asarray(preds)
    gts_arr = np.asarray(gts)
    return evaluate(preds_arr, gts_arr, mos_scale=mos_scale), preds_arr, gts_arr


def train(config: TrainConfig, train_samples: Sequence[ArraySample],
          test_samples: Sequence[ArraySample] | None = None,
          runs_dir=None, max_steps: int | None = None,
          step_callback=None) -> TrainResult:
    """Run the staged schedule and return the trained network plus history.

    Checkpoints are written at every stage boundary and at the end when
    ``runs_dir`` is given. ``max_steps`` caps total optimizer steps (used by
    short desk-scale runs); ``step_callback(step, loss)`` can stop training
    early by returning True.
    """
    config.validate()
    _check_samples(train_samples, "train")
    if config.batch_size > len(train_samples):
        raise ValueError(f"batch_size {config.batch_size} exceeds train set size {len(train_samples)}")

    seed_everything(config.seed)
    rng = np.random.default_rng(config.seed)

    net = build_network(config)
    optimizer = torch.optim.Adam(net.parameters(), lr=config.stages[0][1],
                                 betas=config.adam_betas, eps=config.adam_eps)

    run_dir = None
    if runs_dir is not None:
        run_dir = Path(runs_dir) / config.name
        run_dir.mkdir(parents=True, exist_ok=True)

    result = TrainResult(net=net, config=config)
    loss_trace: list[float] = []
    epoch = 0
    step = 0
    stop = False

    for stage_epochs, stage_lr in config.stages:
        for group in optimizer.param_groups:
            group["lr"] = stage_lr
        for _ in range(stage_epochs):
            epoch += 1
            net.train()
            order = rng.permutation(len(train_samples))
            epoch_losses = []
            for batch_index, start in enumerate(range(0, len(order), config.batch_size)):
                indices = order[start:start + config.batch_size]
                if len(indices) == 1 and config.batch_size > 1:
                    # trailing singleton: batch-norm cannot compute batch
                    # statistics from one sample; it rejoins next epoch's shuffle
                    continue
                images, targets = _batch_tensor(train_samples, indices, rng,
                                                augment_data=config.augment)
                result.lr_by_step.append(optimizer.param_groups[0]["lr"])
                scores = batch_scores(net, images, config.resolved_loss_form)
                loss = aggregation.l1_loss(scores, targets)
                loss_value = float(loss.detach())
                loss_trace.append(loss_value)
                del loss_trace[:-8]
                if not np.isfinite(loss_value):
                    raise TrainingDivergedError(epoch, batch_index, loss_trace)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                epoch_losses.append(loss_value)
                step += 1
                if step_callback is not None and step_callback(step, loss_value):
                    stop = True
                if max_steps is not None and step >= max_steps:
                    stop = True
                if stop:
                    break

            row = {"epoch": epoch, "loss": float(np.mean(epoch_losses)) if epoch_losses else float("nan"),
                   "plcc": float("nan"), "srcc": float("nan"), "rmse": float("nan")}
            if test_samples:
                report, _, _ = evaluate_model(net, test_samples, config.resolved_score_form,
                                              batch_size=config.batch_size)
                row.update(plcc=report.plcc, srcc=report.srcc, rmse=report.rmse)
                result.report = report
            result.history.append(row)
            if run_dir is not None:
                write_history_csv(result.history, run_dir / "history.csv")
            if stop:
                break
        if run_dir is not None:
            result.checkpoint_dir = save_checkpoint(
                run_dir / f"ckpt_{epoch}", net, optimizer, config, result.history, epoch)
        if stop:
            break

    if run_dir is not None and result.checkpoint_dir != run_dir / f"ckpt_{epoch}":
        result.checkpoint_dir = save_checkpoint(
            run_dir / f"ckpt_{epoch}", net, optimizer, config, result.history, epoch)
    if test_samples and result.report is None:
        result.report, _, _ = evaluate_model(net, test_samples, config.resolved_score_form,
                                             batch_size=config.batch_size)
    return result


def write_history_csv(history: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row.get(k) for k in HISTORY_COLUMNS})


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(ckpt_dir, net: PIQANet, optimizer, config: TrainConfig,
                    history: list[dict], epoch: int) -> Path:
    """Write weights, optimizer state and a JSON manifest into a directory."""
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    torch.save(net.state_dict(), ckpt_dir / "weights.pt")
    if optimizer is not None:
        torch.save(optimizer.state_dict(), ckpt_dir / "optimizer.pt")
    manifest = {
        "epoch": epoch,
        "config": config.snapshot(),
        "parameters": network_manifest(net),
        "history": history,
    }
    with open(ckpt_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return ckpt_dir


def config_from_snapshot(snapshot: dict) -> TrainConfig:
    """Rebuild a TrainConfig from a manifest's config snapshot."""
    values = dict(snapshot)
    values.pop("resize_kernel", None)
    values["stages"] = parse_stages(values["stages"])
    values["dim_rates"] = tuple(int(v) for v in str(values["dim_rates"]).split(","))
    values["adam_betas"] = tuple(float(v) for v in str(values["adam_betas"]).split(","))
    return TrainConfig(**values)


def load_checkpoint(ckpt_dir) -> tuple[PIQANet, TrainConfig, list[dict], int]:
    """Rebuild the network from a checkpoint directory.

    A reloaded network reproduces eval-mode outputs bit-identically on the
    same hardware and precision.
    """
    ckpt_dir = Path(ckpt_dir)
    manifest_path = ckpt_dir / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"checkpoint manifest not found: {manifest_path}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    config = config_from_snapshot(manifest["config"])
    try:
        net = build_network(config)
    except BackboneWeightsError:
        # The checkpoint itself carries the weights; the original external
        # file is only needed to build the topology, which matches the toy.
        net = build_network(replace(config, backbone_variant="toy"))
    state = torch.load(ckpt_dir / "weights.pt", map_location="cpu", weights_only=True)
    net.load_state_dict(state)
    net.eval()
    return net, config, manifest.get("history", []), manifest.get("epoch", 0)


# ---------------------------------------------------------------------------
# Ablations
# ---------------------------------------------------------------------------

def ablation_matrix(base: TrainConfig) -> list[TrainConfig]:
    """Named variants covering the component, loss, normalizer and context
    ablations.

    The local-only variant trains with the plain loss since mean-shifted
    aggregation is identically zero under uniform weights.
    """
    base.validate()
    variants = [
        replace(base, name=f"{base.name}-local-only", use_roi=False, use_highlevel=False,
                use_dim=False, loss_form="plain"),
        replace(base, name=f"{base.name}-local-roi", use_highlevel=False, use_dim=False),
        replace(base, name=f"{base.name}-full"),
        replace(base, name=f"{base.name}-plain-loss", loss_form="plain"),
        replace(base, name=f"{base.name}-softmax", roi_normalize="softmax"),
        replace(base, name=f"{base.name}-no-dim", use_dim=False),
    ]
    return [v.validate() for v in variants]
