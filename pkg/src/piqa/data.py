"""Dataset handling: manifests, MOS rescaling, seeded splits, augmentation,
half-size resizing and a procedural synthetic-distortion dataset.

Manifests are plain CSV with columns ``image_path,mos`` (header optional,
UTF-8). All randomness is driven by explicit seeds so every operation is
reproducible given (inputs, seed).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from PIL import Image

# Kernel used by resize_half; recorded in run metadata for reproducibility.
RESIZE_KERNEL = "bilinear"

MOS_MAX = 5.0
MOS_MIN = 1.0

DISTORTION_KINDS = ("blur", "noise", "block")


class ManifestError(ValueError):
    """Raised for missing or malformed manifest files."""


@dataclass
class DatasetRecord:
    """One dataset entry: an image reference plus its ground-truth MOS."""

    image_id: str
    image_path: str
    mos: float
    split: str = ""

    def __post_init__(self):
        if not math.isfinite(self.mos):
            raise ValueError(f"non-finite MOS for {self.image_id!r}: {self.mos}")


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/test partition parameters."""

    seed: int
    train_fraction: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


class ArraySample(NamedTuple):
    """In-memory training sample: image array in [0,1] plus its MOS."""

    image: np.ndarray
    mos: float


# ---------------------------------------------------------------------------
# Manifest I/O
# ---------------------------------------------------------------------------

def load_manifest(path) -> list[DatasetRecord]:
    """Read a CSV manifest (``image_path,mos``) into records.

    The header row is optional. Rows with a non-numeric MOS raise
    ManifestError naming the offending row. Image paths are kept verbatim;
    existence is checked by the consumer so unreadable images get reported,
    not silently dropped.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    records: list[DatasetRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ManifestError(f"{path}: row {lineno}: expected 'image_path,mos', got {row!r}")
            image_path, mos_text = row[0].strip(), row[1].strip()
            if lineno == 1 and _looks_like_header(image_path, mos_text):
                continue
            try:
                mos = float(mos_text)
            except ValueError:
                raise ManifestError(f"{path}: row {lineno}: non-numeric MOS {mos_text!r}") from None
            records.append(DatasetRecord(image_id=Path(image_path).stem, image_path=image_path, mos=mos))
    if not records:
        warnings.warn(f"manifest {path} contains no records", stacklevel=2)
    return records


_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff")


def _looks_like_header(first: str, second: str) -> bool:
    # A header has a non-numeric second column and a first column that is
    # not an image file; "c.png,abc" stays a (malformed) data row.
    try:
        float(second)
    except ValueError:
        return not first.lower().endswith(_IMAGE_SUFFIXES)
    return False


def save_manifest(records: Sequence[DatasetRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for rec in records:
            writer.writerow([rec.image_path, repr(float(rec.mos))])


def write_split_file(records: Sequence[DatasetRecord], path) -> None:
    """Write the ``image_id,split`` assignment CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "split"])
        for rec in records:
            writer.writerow([rec.image_id, rec.split])


def load_image(path) -> np.ndarray:
    """Decode an image file to a float32 (H, W, 3) array in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return arr


def save_image_png(img: np.ndarray, path) -> None:
    """Write a [0,1] float image as an 8-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    Image.fromarray((arr * 255.0).round().astype(np.uint8), mode="RGB").save(path, format="PNG")


def samples_from_records(records: Sequence[DatasetRecord], root=None) -> list[ArraySample]:
    """Eagerly decode record images into memory (desk-scale datasets only).

    Relative image paths are resolved against ``root`` when given. Unreadable
    images raise with the record id so they are reported, never dropped.
    """
    samples = []
    for rec in records:
        path = Path(rec.image_path)
        if root is not None and not path.is_absolute():
            path = Path(root) / path
        try:
            samples.append(ArraySample(load_image(path), float(rec.mos)))
        except (FileNotFoundError, OSError) as exc:
            raise ManifestError(f"record {rec.image_id!r}: cannot read image: {exc}") from exc
    return samples


# ---------------------------------------------------------------------------
# MOS rescaling and splitting
# ---------------------------------------------------------------------------

def mos_stats(records: Sequence[DatasetRecord]) -> tuple[float, float]:
    """Sample mean and sample std (ddof=1) of the record MOS values."""
    values = np.asarray([rec.mos for rec in records], dtype=np.float64)
    if values.size < 2:
        raise ValueError("need at least 2 records for MOS statistics")
    return float(values.mean()), float(values.std(ddof=1))


def rescale_mos(records: Sequence[DatasetRecord], target_mean: float, target_std: float) -> list[DatasetRecord]:
    """Affinely map MOS values so the sample mean/std match the targets.

    x' = (x - mean_src) / std_src * target_std + target_mean. The map is
    order-preserving for positive stds, so ranks are untouched.
    """
    mean_src, std_src = mos_stats(records)
    if std_src <= 0.0:
        raise ValueError("source MOS values are constant; rescaling is undefined")
    scale = target_std / std_src
    return [replace(rec, mos=(rec.mos - mean_src) * scale + target_mean) for rec in records]


def split(records: Sequence[DatasetRecord], spec: SplitSpec) -> tuple[list[DatasetRecord], list[DatasetRecord]]:
    """Seeded random partition with |train| = floor(train_fraction * n)."""
    if len(records) < 2:
        raise ValueError(f"need at least 2 records to split, got {len(records)}")
    order = np.random.default_rng(spec.seed).permutation(len(records))
    n_train = int(math.floor(spec.train_fraction * len(records)))
    train_idx = set(order[:n_train].tolist())
    train = [replace(rec, split="train") for i, rec in enumerate(records) if i in train_idx]
    test = [replace(rec, split="test") for i, rec in enumerate(records) if i not in train_idx]
    return train, test


def assign_splits(records: Sequence[DatasetRecord], spec: SplitSpec) -> list[DatasetRecord]:
    """Return all records with their split tag assigned, in input order."""
    train, test = split(records, spec)
    by_id = {rec.image_id: rec for rec in train}
    by_id.update({rec.image_id: rec for rec in test})
    return [by_id[rec.image_id] for rec in records]


# ---------------------------------------------------------------------------
# Augmentation and resizing
# ---------------------------------------------------------------------------

def augment(img: np.ndarray, rng: np.random.Generator | None = None, *,
            rotate: bool | None = None, hflip: bool | None = None,
            vflip: bool | None = None) -> np.ndarray:
    """Randomly 180-degree-rotate and flip an image; the MOS label is unchanged.

    Each transform is an independent coin flip drawn from ``rng`` unless
    pinned explicitly. All three are pixel permutations, so the value
    multiset is preserved.
    """
    if rotate is None or hflip is None or vflip is None:
        if rng is None:
            raise ValueError("augment needs an rng when coin flips are not pinned")
        rotate = bool(rng.integers(0, 2)) if rotate is None else rotate
        hflip = bool(rng.integers(0, 2)) if hflip is None else hflip
        vflip = bool(rng.integers(0, 2)) if vflip is None else vflip
    out = img
    if rotate:
        out = out[::-1, ::-1]
    if hflip:
        out = out[:, ::-1]
    if vflip:
        out = out[::-1, :]
    return np.ascontiguousarray(out)


def resize_half(img: np.ndarray, pad_odd: bool = False) -> np.ndarray:
    """Downsize an image by 1/2 per axis with the bilinear (2x2 mean) kernel.

    Odd dimensions raise unless ``pad_odd`` is set, in which case the last
    row/column is edge-replicated first.
    """
    img = np.asarray(img)
    h, w = img.shape[:2]
    if (h % 2 or w % 2) and not pad_odd:
        raise ValueError(f"resize_half needs even dims, got {w}x{h} (pass pad_odd=True to pad)")
    if h % 2:
        img = np.concatenate([img, img[-1:]], axis=0)
        h += 1
    if w % 2:
        img = np.concatenate([img, img[:, -1:]], axis=1)
        w += 1
    out = img.reshape(h // 2, 2, w // 2, 2, *img.shape[2:]).mean(axis=(1, 3))
    return out.astype(img.dtype, copy=False)


# ---------------------------------------------------------------------------
# Synthetic distortion dataset
# ---------------------------------------------------------------------------

def mos_from_strength(strength: float) -> float:
    """Map a distortion strength in [0,1] to a MOS on the [1,5] scale."""
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"distortion strength must lie in [0, 1], got {strength}")
    return MOS_MAX - (MOS_MAX - MOS_MIN) * strength


def _smooth_background(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Near-flat background: a random color with a gentle luminance ramp."""
    base = rng.uniform(0.25, 0.75, size=3)
    gy = rng.uniform(-0.15, 0.15)
    gx = rng.uniform(-0.15, 0.15)
    yy, xx = np.meshgrid(np.linspace(-0.5, 0.5, h), np.linspace(-0.5, 0.5, w), indexing="ij")
    ramp = gy * yy + gx * xx
    return np.clip(base[None, None, :] + ramp[:, :, None], 0.0, 1.0)


def _texture_patch(rng: np.random.Generator, ph: int, pw: int) -> np.ndarray:
    """One textured tile: grating, checker, or band-limited noise."""
    kind = rng.integers(0, 3)
    yy, xx = np.meshgrid(np.arange(ph, dtype=np.float64), np.arange(pw, dtype=np.float64), indexing="ij")
    if kind == 0:
        freq = rng.uniform(0.25, 1.2)
        theta = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        tex = 0.5 + 0.5 * np.sin(freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)
    elif kind == 1:
        cell = int(rng.integers(2, 7))
        tex = (((yy // cell) + (xx // cell)) % 2).astype(np.float64)
    else:
        tex = rng.random((ph, pw))
        for _ in range(int(rng.integers(0, 2))):
            tex = _box_blur(tex, 1)
        lo, hi = tex.min(), tex.max()
        tex = (tex - lo) / (hi - lo) if hi > lo else tex * 0.0
    contrast = rng.uniform(0.35, 1.0)
    color = rng.uniform(0.15, 0.85, size=3)
    patch = color[None, None, :] + contrast * (tex[:, :, None] - 0.5)
    return np.clip(patch, 0.0, 1.0)


def _box_blur(x: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return x
    k = 2 * radius + 1
    pad = np.pad(x, ((radius, radius), (radius, radius)), mode="edge")
    out = np.zeros_like(x, dtype=np.float64)
    for dy in range(k):
        for dx in range(k):
            out += pad[dy:dy + x.shape[0], dx:dx + x.shape[1]]
    return out / (k * k)


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0.0:
        return img
    k = _gaussian_kernel(sigma)
    r = len(k) // 2
    out = np.pad(img, ((r, r), (0, 0), (0, 0)), mode="reflect")
    out = np.apply_along_axis(lambda col: np.convolve(col, k, mode="valid"), 0, out)
    out = np.pad(out, ((0, 0), (r, r), (0, 0)), mode="reflect")
    out = np.apply_along_axis(lambda row: np.convolve(row, k, mode="valid"), 1, out)
    return out


def _block_flatten(img: np.ndarray, strength: float, cell: int = 8) -> np.ndarray:
    """JPEG-like blocking: pull each 8x8 cell toward its mean color."""
    h, w = img.shape[:2]
    ph, pw = (-h) % cell, (-w) % cell
    padded = np.pad(img, ((0, ph), (0, pw), (0, 0)), mode="edge")
    hh, ww = padded.shape[:2]
    blocks = padded.reshape(hh // cell, cell, ww // cell, cell, 3)
    means = blocks.mean(axis=(1, 3), keepdims=True)
    flat = (1.0 - strength) * blocks + strength * means
    return flat.reshape(hh, ww, 3)[:h, :w]


def apply_distortion(img: np.ndarray, kind: str, strength: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Degrade an image with one distortion type at the given strength."""
    if kind not in DISTORTION_KINDS:
        raise ValueError(f"unknown distortion kind {kind!r}")
    if strength <= 0.0:
        return img
    if kind == "blur":
        return np.clip(_gaussian_blur(img, sigma=2.8 * strength), 0.0, 1.0)
    if kind == "noise":
        noise = rng.normal(0.0, 0.22 * strength, size=img.shape)
        return np.clip(img + noise, 0.0, 1.0)
    return np.clip(_block_flatten(img, strength), 0.0, 1.0)


def render_clean_image(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Pristine procedural image: textured patches over a smooth background.

    The textured-area fraction, patch scales, contrasts and colors all vary
    per image, so they act as content nuisance rather than quality cues.
    """
    img = _smooth_background(rng, height, width)
    n_patches = int(rng.integers(2, 6))
    for _ in range(n_patches):
        ph = int(rng.integers(height // 5, max(height // 5 + 1, (2 * height) // 3)))
        pw = int(rng.integers(width // 5, max(width // 5 + 1, (2 * width) // 3)))
        y0 = int(rng.integers(0, height - ph + 1))
        x0 = int(rng.integers(0, width - pw + 1))
        img[y0:y0 + ph, x0:x0 + pw] = _texture_patch(rng, ph, pw)
    return img


def synthesize_samples(n: int, seed: int, size: tuple[int, int] = (64, 64),
                       with_meta: bool = False):
    """Generate ``n`` distorted images with MOS labels, deterministic per seed.

    Each image receives one random distortion kind at strength s ~ U[0,1];
    the label is mos = 5 - 4s, strictly decreasing in distortion strength.
    ``size`` is (width, height).
    """
    if n < 8:
        raise ValueError(f"synthetic dataset needs n >= 8, got {n}")
    width, height = size
    rng = np.random.default_rng(seed)
    samples = []
    meta = []
    for _ in range(n):
        clean = render_clean_image(rng, height, width)
        kind = DISTORTION_KINDS[int(rng.integers(0, len(DISTORTION_KINDS)))]
        strength = float(rng.uniform(0.0, 1.0))
        img = apply_distortion(clean, kind, strength, rng).astype(np.float32)
        samples.append(ArraySample(img, mos_from_strength(strength)))
        meta.append({"kind": kind, "strength": strength})
    if with_meta:
        return samples, meta
    return samples


def make_synthetic_dataset(n: int, seed: int, out_dir,
                           size: tuple[int, int] = (64, 64)) -> list[DatasetRecord]:
    """Materialize a synthetic dataset: PNG images plus a ``manifest.csv``."""
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    samples, meta = synthesize_samples(n, seed, size=size, with_meta=True)
    records = []
    for idx, (sample, info) in enumerate(zip(samples, meta)):
        name = f"synth_{seed}_{idx:05d}.png"
        save_image_png(sample.image, images_dir / name)
        records.append(DatasetRecord(
            image_id=Path(name).stem,
            image_path=str(Path("images") / name),
            mos=sample.mos,
        ))
    save_manifest(records, out_dir / "manifest.csv")
    return records
