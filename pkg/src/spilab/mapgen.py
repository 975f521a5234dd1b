"""Image map generation.

A map is built by low-pass filtering complex white Gaussian noise in the
Fourier domain and uniformly quantizing the phase of the result. The filter
is the Gaussian transfer function

    H(u, v) = exp(-pi^2 * l^2 * (u^2 + v^2) / 2),

with u, v in cycles/pixel in [-0.5, 0.5). The constant is normalized so
that the 1/e half-width of the field autocovariance is approximately l
(the power spectrum is H^2, whose inverse transform is exp(-r^2 / l^2)),
making l a directly testable characteristic feature size. DFT boundary
wrap-around is accepted; regions may be disconnected anyway.
"""

from __future__ import annotations

import numpy as np

from .errors import BadParam
from .model import ImageMap, MapStack, compact_labels, split_seed


def gen_correlated_field(
    width: int, height: int, char_size: float, seed: int
) -> np.ndarray:
    """Correlated complex Gaussian field of shape (height, width).

    Deterministic given the seed. char_size -> 0 degenerates to white noise
    (identity filter).
    """
    if char_size <= 0:
        raise BadParam(f"characteristic size must be > 0, got {char_size}")
    if char_size > min(width, height) / 2:
        raise BadParam(
            f"characteristic size {char_size} exceeds min(width, height)/2"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    white = rng.standard_normal((height, width)) + 1j * rng.standard_normal(
        (height, width)
    )
    u = np.fft.fftfreq(width)
    v = np.fft.fftfreq(height)
    transfer = np.exp(
        -0.5 * np.pi**2 * char_size**2 * (u[np.newaxis, :] ** 2 + v[:, np.newaxis] ** 2)
    )
    return np.fft.ifft2(np.fft.fft2(white) * transfer)


def quantize_phase_to_map(field: np.ndarray, levels: int) -> ImageMap:
    """Uniform phase quantization into at most ``levels`` bins.

    Unused bins are compacted away, so the resulting region count can be
    smaller than ``levels``.
    """
    if levels < 2:
        raise BadParam(f"levels must be >= 2, got {levels}")
    if not np.all(np.isfinite(field)):
        raise BadParam("field contains non-finite values")
    phase = np.angle(field)  # (-pi, pi]
    bins = np.floor((phase + np.pi) * levels / (2.0 * np.pi)).astype(np.int64)
    bins = np.minimum(bins, levels - 1)
    labels, count = compact_labels(bins)
    height, width = labels.shape
    return ImageMap(width=width, height=height, labels=labels, region_count=count)


def build_map(
    width: int, height: int, char_size: float, levels: int, seed: int
) -> ImageMap:
    return quantize_phase_to_map(
        gen_correlated_field(width, height, char_size, seed), levels
    )


def build_map_stack(
    width: int,
    height: int,
    params: list[tuple[float, int]],
    master_seed: int,
) -> MapStack:
    """One map per (char_size, levels) pair; map m uses split_seed(master, m)."""
    if not params:
        raise BadParam("params must contain at least one (char_size, levels) pair")
    maps = [
        build_map(width, height, l, q, split_seed(master_seed, m))
        for m, (l, q) in enumerate(params)
    ]
    return MapStack(maps=tuple(maps), seed=master_seed, params=tuple(params))
