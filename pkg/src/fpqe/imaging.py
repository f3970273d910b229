"""Separable resize kernels: area averaging, bilinear, nearest neighbour.

Each kernel is a (out, in) matrix applied along rows and columns, so a
resize of a (..., H, W) array is ``A_h @ x @ A_w.T``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def area_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Output cell i averages the input interval [i*s, (i+1)*s) with s = n_in/n_out, fractional overlaps weighted."""
    scale = n_in / n_out
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        for j in range(int(np.floor(lo)), min(int(np.ceil(hi)), n_in)):
            m[i, j] = min(hi, j + 1) - max(lo, j)
    return m / m.sum(axis=1, keepdims=True)


@lru_cache(maxsize=None)
def bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Half-pixel-centre linear interpolation with edge clamping."""
    m = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        src = min(max((i + 0.5) * scale - 0.5, 0.0), n_in - 1)
        j0 = int(np.floor(src))
        j1 = min(j0 + 1, n_in - 1)
        t = src - j0
        m[i, j0] += 1 - t
        m[i, j1] += t
    return m


@lru_cache(maxsize=None)
def nearest_matrix(n_in: int, n_out: int) -> np.ndarray:
    m = np.zeros((n_out, n_in))
    src = np.minimum((np.arange(n_out) * n_in) // n_out, n_in - 1)
    m[np.arange(n_out), src] = 1.0
    return m


_KERNELS = {"area": area_matrix, "bilinear": bilinear_matrix, "nearest": nearest_matrix}


def resize(x: np.ndarray, size: tuple[int, int], method: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[-2:]
    oh, ow = size
    if (h, w) == (oh, ow):
        return x.copy()
    kern = _KERNELS[method]
    return kern(h, oh) @ x @ kern(w, ow).T


def downsample(x: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    return resize(x, size, "area")


def upsample(x: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    return resize(x, size, "bilinear")


def to_gray(x: np.ndarray) -> np.ndarray:
    """(C, H, W) -> (H, W) by channel mean; 2-D input passes through."""
    x = np.asarray(x, dtype=np.float64)
    return x.mean(axis=0) if x.ndim == 3 else x
