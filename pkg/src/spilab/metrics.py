"""Image quality metrics: PSNR and single-scale SSIM.

Images are assumed normalized to [0, 1], so the PSNR peak is fixed at 1.0.
SSIM follows the original Wang et al. parameterization: 11x11 Gaussian
window with sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1, averaged over all fully
valid window positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, TooSmall
from .model import SceneImage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricResult:
    psnr_db: float  # math.inf for identical images
    ssim: float | None  # None when the raster is too small for the window


def _check_dims(ref: SceneImage, test: SceneImage):
    if (ref.width, ref.height) != (test.width, test.height):
        raise DimensionMismatch(
            f"reference {ref.width}x{ref.height} vs test {test.width}x{test.height}"
        )


def psnr(ref: SceneImage, test: SceneImage) -> float:
    """10 * log10(1 / MSE) with peak 1.0; +inf for identical images."""
    _check_dims(ref, test)
    mse = float(np.mean((ref.data - test.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(coords**2) / (2.0 * SSIM_SIGMA**2))
    w = np.outer(g, g)
    return w / w.sum()


_WINDOW = _gaussian_window()


def _windowed(a: np.ndarray) -> np.ndarray:
    # correlate then crop the margin: identical to a valid-mode correlation
    half = SSIM_WINDOW // 2
    full = ndimage.correlate(a, _WINDOW, mode="constant")
    return full[half:-half, half:-half]


def ssim(ref: SceneImage, test: SceneImage) -> float:
    """Mean single-scale SSIM over all valid window positions."""
    _check_dims(ref, test)
    if min(ref.width, ref.height) < SSIM_WINDOW:
        raise TooSmall(
            f"raster {ref.width}x{ref.height} is smaller than the "
            f"{SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    x = ref.data
    y = test.data
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_x = _windowed(x)
    mu_y = _windowed(y)
    var_x = _windowed(x * x) - mu_x**2
    var_y = _windowed(y * y) - mu_y**2
    cov = _windowed(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def compare(ref: SceneImage, test: SceneImage) -> MetricResult:
    """PSNR always; SSIM when the raster fits the window, else None."""
    try:
        s = ssim(ref, test)
    except TooSmall:
        s = None
    return MetricResult(psnr_db=psnr(ref, test), ssim=s)
