"""Reconstruction fidelity: MSE, PSNR and single-scale SSIM for images in [0, 1]."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {y.shape}")
    return x, y


def mse_metric(x, y) -> float:
    x, y = _pair(x, y)
    return float(np.mean((x - y) ** 2))


def psnr_from_mse(mse: float, max_val: float = 1.0) -> float:
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


def psnr_metric(x, y, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical images give ``inf``."""
    return psnr_from_mse(mse_metric(x, y), max_val)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_2d(x: np.ndarray, y: np.ndarray, data_range: float) -> float:
    size = min(SSIM_WINDOW, x.shape[0], x.shape[1])
    if size % 2 == 0:
        size -= 1
    w = gaussian_window(size, SSIM_SIGMA)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def filt(a):
        return np.einsum("ijuv,uv->ij", sliding_window_view(a, (size, size)), w, optimize=True)

    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim_metric(x, y, data_range: float = 1.0) -> float:
    """Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows.

    Accepts (H, W), (C, H, W) or (1, H, W); colour images average the
    per-channel scores.  Images smaller than 11 pixels use the largest odd
    window that fits.
    """
    x, y = _pair(x, y)
    if x.ndim == 2:
        return _ssim_2d(x, y, data_range)
    if x.ndim == 3:
        return float(np.mean([_ssim_2d(a, b, data_range) for a, b in zip(x, y)]))
    raise ValueError(f"expected a 2-D or 3-D image, got shape {x.shape}")


@dataclass
class FidelityReport:
    mse: float
    psnr: float
    ssim: float
    n_images: int
    excluded_inf: int = 0
    aggregation: str = "per-image-mean"

    def row(self) -> dict[str, float | int]:
        return {"mse": self.mse, "psnr_db": self.psnr, "ssim": self.ssim,
                "n": self.n_images, "excluded_inf_count": self.excluded_inf}


def batch_report(images: Iterable[np.ndarray], reconstructor: Callable[[np.ndarray], np.ndarray],
                 psnr_mode: str = "per-image") -> FidelityReport:
    """Average per-image metrics of ``reconstructor(x)`` against ``x``."""
    images = list(images)
    return paired_report(images, [reconstructor(x) for x in images], psnr_mode)


def paired_report(originals: Sequence[np.ndarray], reconstructions: Sequence[np.ndarray],
                  psnr_mode: str = "per-image") -> FidelityReport:
    """Average per-image metrics over aligned original/reconstruction pairs.

    ``psnr_mode="per-image"`` averages per-image PSNRs (infinite ones are
    skipped and counted); ``"mean-mse"`` reports the PSNR of the mean MSE.
    """
    if len(originals) != len(reconstructions):
        raise ValueError(f"{len(originals)} originals but {len(reconstructions)} reconstructions")
    if len(originals) == 0:
        raise ValueError("fidelity report: empty dataset")
    if psnr_mode not in ("per-image", "mean-mse"):
        raise ValueError(f"unknown psnr_mode {psnr_mode!r}")
    mses = [mse_metric(x, xr) for x, xr in zip(originals, reconstructions)]
    ssims = [ssim_metric(x, xr) for x, xr in zip(originals, reconstructions)]
    psnrs = [psnr_from_mse(m) for m in mses]
    finite = [p for p in psnrs if math.isfinite(p)]
    excluded = len(psnrs) - len(finite)
    mse = float(np.mean(mses))
    if psnr_mode == "per-image":
        psnr = float(np.mean(finite)) if finite else math.inf
    else:
        psnr = psnr_from_mse(mse)
    return FidelityReport(mse, psnr, float(np.mean(ssims)), len(mses), excluded,
                          "per-image-mean" if psnr_mode == "per-image" else "mean-mse")
