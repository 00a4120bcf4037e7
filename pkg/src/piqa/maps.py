"""Float map files and heatmap rendering.

The ``.pmap`` format is a tiny binary container for dense float maps:
magic ``PMAP`` (4 bytes), then width, height and channel count as u32
little-endian, then the payload as float32 little-endian, row-major.
Heatmaps are min-max normalized grayscale PNGs with the (min, max) range
recorded in a JSON sidecar so the original values can be regenerated.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

MAGIC = b"PMAP"
_HEADER = struct.Struct("<4sIII")


class FloatMapError(ValueError):
    """Malformed .pmap file."""


def write_float_map(path, arr: np.ndarray) -> None:
    """Write a (H, W) or (H, W, C) float array as a .pmap file."""
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"expected a 2-D or 3-D map, got shape {arr.shape}")
    h, w, c = arr.shape
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, w, h, c))
        fh.write(payload)


def read_float_map(path) -> np.ndarray:
    """Read a .pmap file back to a float32 array; 1-channel maps squeeze to 2-D."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FloatMapError(f"{path}: truncated header")
    magic, w, h, c = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FloatMapError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + w * h * c * 4
    if len(data) != expected:
        raise FloatMapError(f"{path}: payload length {len(data) - _HEADER.size} does not match "
                            f"{w}x{h}x{c} float32 ({expected - _HEADER.size} bytes)")
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(h, w, c)
    return arr[:, :, 0].copy() if c == 1 else arr.copy()


def write_heatmap_png(path, arr: np.ndarray) -> tuple[float, float]:
    """Render a map as a min-max normalized grayscale PNG.

    The value range is written to a ``<path>.json`` sidecar; constant maps
    render as black with the range recorded. Returns (min, max).
    """
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"heatmaps are rendered from 2-D maps, got shape {arr.shape}")
    lo, hi = float(arr.min()), float(arr.max())
    scaled = np.zeros_like(arr) if hi == lo else (arr - lo) / (hi - lo)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray((scaled * 255.0).round().astype(np.uint8), mode="L").save(path, format="PNG")
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump({"min": lo, "max": hi}, fh)
    return lo, hi


def mean_map(maps) -> np.ndarray:
    """Pixelwise mean of same-sized maps (e.g. averaged region weights)."""
    stack = [np.asarray(m, dtype=np.float64) for m in maps]
    if not stack:
        raise ValueError("cannot average an empty collection of maps")
    dims = {m.shape for m in stack}
    if len(dims) != 1:
        raise ValueError(f"maps must share dimensions, got {sorted(dims)}")
    return np.mean(stack, axis=0)
