"""Input validation helpers shared by the estimator, networks and CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch


def as_image(x) -> np.ndarray:
    """Coerce input to a float32 (H, W, 3) image with values clamped to [0, 1].

    Accepts arrays (grayscale or RGB, any float/int dtype) or a file path.
    """
    if isinstance(x, (str, Path)):
        from .data import load_image

        return load_image(x)
    arr = np.asarray(x)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image dims must be at least 1x1, got {arr.shape[:2]}")
    if np.issubdtype(arr.dtype, np.integer):
        arr = arr.astype(np.float32) / 255.0
    arr = np.clip(arr.astype(np.float32, copy=False), 0.0, 1.0)
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    return arr


def as_image_list(X) -> list[np.ndarray]:
    """Coerce a batch argument (4-D array or iterable of images/paths)."""
    if isinstance(X, np.ndarray) and X.ndim == 4:
        return [as_image(x) for x in X]
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [as_image(X)]
    return [as_image(x) for x in X]


def image_to_tensor(img: np.ndarray) -> torch.Tensor:
    """(H, W, 3) array in [0,1] to a (1, 3, H, W) float32 tensor."""
    arr = as_image(img)
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]


def stack_to_tensor(images) -> torch.Tensor:
    """Stack same-sized images into a (N, 3, H, W) tensor."""
    arrs = [as_image(img) for img in images]
    dims = {a.shape[:2] for a in arrs}
    if len(dims) != 1:
        raise ValueError(f"images in a batch must share dimensions, got {sorted(dims)}")
    return torch.from_numpy(np.ascontiguousarray(np.stack(arrs).transpose(0, 3, 1, 2)))


def check_targets(y, n: int) -> np.ndarray:
    """Validate MOS targets: 1-D, finite, length n."""
    arr = np.asarray(y, dtype=np.float64).ravel()
    if arr.size != n:
        raise ValueError(f"got {arr.size} targets for {n} images")
    if not np.isfinite(arr).all():
        raise ValueError("targets must be finite")
    return arr
