"""Command-line interface.

Subcommands: ``prepare`` (synthetic dataset), ``train``, ``eval``,
``predict`` (single image plus map artifacts) and ``export-maps``
(per-image heatmaps or the set-averaged region-weight map).

Exit codes: 0 success, 1 configuration errors, 2 data errors, 3 runtime
failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import data as data_mod
from . import maps as maps_mod
from .backbone import BackboneWeightsError
from .config import ConfigError, TrainConfig, config_from_file, parse_stages
from .data import ManifestError, SplitSpec
from .maps import FloatMapError
from .metrics import center_mass_share
from .model import predict_maps, predict_score
from .training import (
    TrainingDivergedError,
    default_runs_dir,
    evaluate_model,
    load_checkpoint,
    seed_everything,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors with the config exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _add_seed(parser):
    parser.add_argument("--seed", type=int, default=None, help="override the effective seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="piqa", description="Pixel-wise no-reference image quality assessment")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="generate a synthetic-distortion dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=64, help="number of images")
    p.add_argument("--size", default="64x64", help="image size as WxH")
    p.add_argument("--train-fraction", type=float, default=0.8)
    _add_seed(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--run-name", default=None)
    p.add_argument("--runs-dir", default=None, help="default: $PIQA_RUNS_DIR or ./runs")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--stages", default=None, help="override stage list, e.g. 30:1e-4,30:5e-4")
    p.add_argument("--loss-form", choices=("ms", "plain"), default=None)
    p.add_argument("--roi-normalize", choices=("linear", "softmax"), default=None)
    p.add_argument("--no-dim", action="store_true", help="replace dilated context convs with rate-1 convs")
    _add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "test", "all"), default="test")
    p.add_argument("--score-form", choices=("ms", "plain", "auto"), default="auto")
    p.add_argument("--report", default=None, help="also write the JSON report to this file")
    _add_seed(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="score one image and export its maps")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out-dir", default=".", help="where map artifacts are written")
    p.add_argument("--score-form", choices=("ms", "plain", "auto"), default="auto")
    p.add_argument("--local-only", action="store_true",
                   help="zero the high-level context, isolating the local pathway")
    _add_seed(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-maps", help="export per-image or set-averaged maps")
    p.add_argument("kind", choices=("mean-roi", "per-image"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "test", "all"), default="all")
    p.add_argument("--out-dir", default="piqa-maps")
    p.add_argument("--local-only", action="store_true")
    p.add_argument("--mixed-dims", choices=("error", "resize"), default="error",
                   help="how to handle images with differing dimensions")
    _add_seed(p)
    p.set_defaults(func=cmd_export_maps)
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_prepare(args) -> int:
    seed = args.seed if args.seed is not None else 0
    try:
        width, height = (int(v) for v in args.size.lower().split("x"))
    except ValueError:
        raise ConfigError(f"bad --size {args.size!r}; expected WxH like 64x64") from None
    records = data_mod.make_synthetic_dataset(args.n, seed, args.out, size=(width, height))
    records = data_mod.assign_splits(records, SplitSpec(seed=seed, train_fraction=args.train_fraction))
    data_mod.write_split_file(records, Path(args.out) / "splits.csv")
    print(json.dumps({
        "out": str(args.out), "n": len(records), "seed": seed,
        "size": f"{width}x{height}", "train_fraction": args.train_fraction,
        "manifest": str(Path(args.out) / "manifest.csv"),
        "splits": str(Path(args.out) / "splits.csv"),
    }, indent=2))
    return EXIT_OK


def _load_config(args) -> TrainConfig:
    overrides = {
        "name": getattr(args, "run_name", None),
        "batch_size": getattr(args, "batch_size", None),
        "stages": parse_stages(args.stages) if getattr(args, "stages", None) else None,
        "loss_form": getattr(args, "loss_form", None),
        "roi_normalize": getattr(args, "roi_normalize", None),
        "seed": args.seed,
    }
    if getattr(args, "no_dim", False):
        overrides["use_dim"] = False
    if args.config:
        return config_from_file(args.config, **{k: v for k, v in overrides.items() if v is not None})
    values = {k: v for k, v in overrides.items() if v is not None}
    return TrainConfig(**values).validate()


def _split_samples(manifest_path, seed, train_fraction, which):
    records = data_mod.load_manifest(manifest_path)
    root = Path(manifest_path).parent
    if which == "all":
        return data_mod.samples_from_records(records, root=root)
    train_recs, test_recs = data_mod.split(records, SplitSpec(seed=seed, train_fraction=train_fraction))
    chosen = train_recs if which == "train" else test_recs
    return data_mod.samples_from_records(chosen, root=root)


def cmd_train(args) -> int:
    config = _load_config(args)
    print(json.dumps({"config": config.snapshot()}, indent=2))
    records = data_mod.load_manifest(args.manifest)
    root = Path(args.manifest).parent
    train_recs, test_recs = data_mod.split(
        records, SplitSpec(seed=config.seed, train_fraction=config.train_fraction))
    train_samples = data_mod.samples_from_records(train_recs, root=root)
    test_samples = data_mod.samples_from_records(test_recs, root=root)
    runs_dir = Path(args.runs_dir) if args.runs_dir else default_runs_dir()
    result = train(config, train_samples, test_samples=test_samples, runs_dir=runs_dir)
    out = {
        "run_dir": str(runs_dir / config.name),
        "checkpoint": str(result.checkpoint_dir),
        "epochs": len(result.history),
    }
    if result.report is not None:
        out["report"] = result.report.as_dict()
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    net, config, _, _ = load_checkpoint(args.checkpoint)
    seed = args.seed if args.seed is not None else config.seed
    seed_everything(seed)
    samples = _split_samples(args.manifest, seed, config.train_fraction, args.split)
    if not samples:
        raise ManifestError(f"no records in split {args.split!r} of {args.manifest}")
    form = config.resolved_score_form if args.score_form == "auto" else \
        {"ms": "mean_shifted", "plain": "plain"}[args.score_form]
    report, _, _ = evaluate_model(net, samples, form, batch_size=config.batch_size)
    payload = {"report": report.as_dict(), "split": args.split, "score_form": form,
               "seed": seed, "config": config.snapshot()}
    print(json.dumps(payload, indent=2))
    print(report.as_table())
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return EXIT_OK


def cmd_predict(args) -> int:
    net, config, _, _ = load_checkpoint(args.checkpoint)
    seed = args.seed if args.seed is not None else config.seed
    seed_everything(seed)
    image = data_mod.load_image(args.image)
    form = config.resolved_score_form if args.score_form == "auto" else \
        {"ms": "mean_shifted", "plain": "plain"}[args.score_form]
    score = predict_score(net, image, form=form, local_only=args.local_only)
    pmos, roi = predict_maps(net, image, local_only=args.local_only)

    out_dir = Path(args.out_dir)
    stem = Path(args.image).stem
    artifacts = {}
    for name, arr in (("pmos", pmos), ("roi", roi)):
        pmap_path = out_dir / f"{stem}_{name}.pmap"
        png_path = out_dir / f"{stem}_{name}.png"
        maps_mod.write_float_map(pmap_path, arr)
        maps_mod.write_heatmap_png(png_path, arr)
        artifacts[name] = {"pmap": str(pmap_path), "png": str(png_path)}

    print(json.dumps({
        "image": args.image, "score": score.value, "form": score.form,
        "local_only": args.local_only, "seed": seed,
        "artifacts": artifacts, "config": config.snapshot(),
    }, indent=2))
    return EXIT_OK


def _resize_map(arr: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    im = Image.fromarray(arr.astype(np.float32), mode="F")
    resized = np.asarray(im.resize((dims[1], dims[0]), Image.BILINEAR), dtype=np.float64)
    total = resized.sum()
    return resized / total if total > 0 else np.full(dims, 1.0 / (dims[0] * dims[1]))


def cmd_export_maps(args) -> int:
    net, config, _, _ = load_checkpoint(args.checkpoint)
    seed = args.seed if args.seed is not None else config.seed
    seed_everything(seed)
    samples = _split_samples(args.manifest, seed, config.train_fraction, args.split)
    if not samples:
        raise ManifestError(f"no records in split {args.split!r} of {args.manifest}")
    out_dir = Path(args.out_dir)

    if args.kind == "per-image":
        written = []
        for idx, sample in enumerate(samples):
            pmos, roi = predict_maps(net, sample.image, local_only=args.local_only)
            for name, arr in (("pmos", pmos), ("roi", roi)):
                maps_mod.write_float_map(out_dir / f"{idx:05d}_{name}.pmap", arr)
                maps_mod.write_heatmap_png(out_dir / f"{idx:05d}_{name}.png", arr)
            written.append(idx)
        print(json.dumps({"kind": "per-image", "count": len(written),
                          "out_dir": str(out_dir), "seed": seed,
                          "config": config.snapshot()}, indent=2))
        return EXIT_OK

    dims = samples[0].image.shape[:2]
    roi_maps = []
    for sample in samples:
        if sample.image.shape[:2] != dims:
            if args.mixed_dims == "error":
                raise ManifestError(
                    f"images differ in dimensions ({sample.image.shape[:2]} vs {dims}); "
                    f"rerun with --mixed-dims resize")
        _, roi = predict_maps(net, sample.image, local_only=args.local_only)
        if roi.shape != dims:
            roi = _resize_map(roi, dims)
        roi_maps.append(roi)
    mean_roi = maps_mod.mean_map(roi_maps)
    maps_mod.write_float_map(out_dir / "mean_roi.pmap", mean_roi)
    maps_mod.write_heatmap_png(out_dir / "mean_roi.png", mean_roi)
    print(json.dumps({
        "kind": "mean-roi", "count": len(roi_maps), "out_dir": str(out_dir),
        "sum": float(mean_roi.sum()),
        "center_mass_share_25": center_mass_share(mean_roi, 0.25),
        "seed": seed, "config": config.snapshot(),
    }, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ConfigError, BackboneWeightsError) as exc:
        print(f"piqa: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ManifestError, FloatMapError, FileNotFoundError, OSError) as exc:
        print(f"piqa: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, RuntimeError, ValueError) as exc:
        print(f"piqa: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
