"""Shared test utilities: independent brute-force oracles and a central
finite-difference gradient checker.

Everything here is deliberately scalar/loop-based so it shares no code path
with the library implementations it verifies.
"""

import math

import numpy as np
import torch


# ---------------------------------------------------------------------------
# Brute-force metric oracles (pure python loops)
# ---------------------------------------------------------------------------

def pearson_scalar(xs, ys):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    dx = math.sqrt(sum((x - mx) ** 2 for x in xs))
    dy = math.sqrt(sum((y - my) ** 2 for y in ys))
    return num / (dx * dy)


def ranks_scalar(xs):
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman_scalar(xs, ys):
    return pearson_scalar(ranks_scalar(xs), ranks_scalar(ys))


def rmse_scalar(xs, ys):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(xs, ys)) / len(xs))


def aggregate_scalar(pmos, weights):
    total = 0.0
    for i in range(len(pmos)):
        for j in range(len(pmos[0])):
            total += pmos[i][j] * weights[i][j]
    return total


def aggregate_ms_scalar(pmos, weights):
    h, w = len(pmos), len(pmos[0])
    mean = sum(pmos[i][j] for i in range(h) for j in range(w)) / (h * w)
    total = 0.0
    for i in range(h):
        for j in range(w):
            total += (pmos[i][j] - mean) * weights[i][j]
    return total


# ---------------------------------------------------------------------------
# Finite-difference gradient checking
# ---------------------------------------------------------------------------

def fd_gradient(func, x: torch.Tensor, h: float = 1e-6) -> torch.Tensor:
    """Central-difference gradient of a scalar function of one tensor."""
    grad = torch.zeros_like(x, dtype=torch.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    with torch.no_grad():
        for idx in range(flat.numel()):
            orig = flat[idx].item()
            flat[idx] = orig + h
            f_plus = float(func(x))
            flat[idx] = orig - h
            f_minus = float(func(x))
            flat[idx] = orig
            gflat[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def autograd_gradient(func, x: torch.Tensor) -> torch.Tensor:
    x = x.detach().clone().requires_grad_(True)
    out = func(x)
    out.backward()
    return x.grad.detach().clone()


def assert_grad_matches(func, x: torch.Tensor, rtol: float = 1e-6,
                        atol: float = 1e-8, h: float = 1e-6):
    """Analytic gradient vs central differences at relative tolerance."""
    analytic = autograd_gradient(func, x).numpy()
    numeric = fd_gradient(func, x.detach().clone(), h=h).numpy()
    err = np.abs(analytic - numeric)
    bad = err > (atol + rtol * np.abs(numeric))
    assert not bad.any(), (
        f"gradient mismatch at {int(bad.sum())} of {bad.size} entries; "
        f"max abs err {err.max():.3e}")
