"""Numba kernels for the per-map hot path.

Accumulation is row-major sequential in float64 so results are identical
regardless of worker count; parallel callers combine per-sample outputs in
index order.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_INF = 1e20


@njit(cache=True)
def dot_rowmajor(a: np.ndarray, b: np.ndarray) -> float:
    """Sequential float64 dot product of two flat arrays."""
    acc = 0.0
    for i in range(a.size):
        acc += a[i] * b[i]
    return acc


@njit(cache=True)
def sum_rowmajor(a: np.ndarray) -> float:
    acc = 0.0
    for i in range(a.size):
        acc += a[i]
    return acc


@njit(cache=True)
def edt_squared(occupied: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest set pixel.

    Two-pass algorithm: linear scans down/up the rows for the vertical
    distance per column, then a per-row lower envelope of parabolas.
    Distances are exact integers stored in float64. All inner loops run
    along rows, keeping the memory access contiguous.
    """
    h, w = occupied.shape
    g = np.empty((h, w), dtype=np.float64)

    for j in range(w):
        g[0, j] = 0.0 if occupied[0, j] else _INF
    for i in range(1, h):
        for j in range(w):
            if occupied[i, j]:
                g[i, j] = 0.0
            else:
                prev = g[i - 1, j]
                g[i, j] = prev + 1.0 if prev < _INF else _INF
    for i in range(h - 2, -1, -1):
        for j in range(w):
            cand = g[i + 1, j] + 1.0
            if cand < g[i, j]:
                g[i, j] = cand
    for i in range(h):
        for j in range(w):
            v0 = g[i, j]
            g[i, j] = v0 * v0 if v0 < _INF else _INF

    out = np.empty((h, w), dtype=np.float64)
    v = np.empty(w, dtype=np.int64)        # parabola sites
    z = np.empty(w + 1, dtype=np.float64)  # envelope breakpoints
    for i in range(h):
        k = 0
        v[0] = 0
        z[0] = -_INF
        z[1] = _INF
        for q in range(1, w):
            fq = g[i, q]
            while True:
                p = v[k]
                s = ((fq + q * q) - (g[i, p] + p * p)) / (2.0 * (q - p))
                if s <= z[k]:
                    k -= 1
                else:
                    break
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = _INF
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            p = v[k]
            out[i, q] = (q - p) * (q - p) + g[i, p]
    return out


@njit(cache=True)
def dot_sqrt_rowmajor(a: np.ndarray, b_squared: np.ndarray) -> float:
    """Sequential float64 sum of a[i] * sqrt(b_squared[i])."""
    acc = 0.0
    for i in range(a.size):
        acc += a[i] * np.sqrt(b_squared[i])
    return acc


def warmup() -> None:
    """Force-compile the kernels (first call pays the JIT cost)."""
    a = np.zeros(4, dtype=np.float64)
    dot_rowmajor(a, a)
    sum_rowmajor(a)
    dot_sqrt_rowmajor(a, a)
    occ = np.zeros((2, 2), dtype=np.uint8)
    occ[0, 0] = 1
    edt_squared(occ)
