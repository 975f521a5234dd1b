"""Detector simulation: forward projection, Gaussian detector noise, DAQ
quantization.

Complementary mode displays each pattern together with its complement and
stores the two readings interleaved (d+ then d-), so the displayed pattern
count doubles. Noise is injected as one stream per measurement set to keep
the seed-to-readings mapping reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadParam, DimensionMismatch
from .model import (
    MODE_COMPLEMENTARY,
    MODE_RAW,
    MeasurementSet,
    SceneImage,
    region_sums_of_image,
)
from .patterns import PatternSet


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian detector noise at a target SNR (None = noiseless).

    snr_db = 0 is the degenerate boundary where sigma equals the RMS of
    the clean readings.
    """

    snr_db: float | None
    seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None and self.snr_db < 0:
            raise BadParam(f"snr_db must be >= 0 when present, got {self.snr_db}")


def forward_measure(
    scene: SceneImage, pattern_set: PatternSet, mode: str = MODE_RAW
) -> MeasurementSet:
    """Clean detector readings, one block per map.

    Raw mode: d_k = sum over on-pixels of the scene. Complementary mode
    additionally records the complement reading; d+ and d- together always
    sum to the total scene intensity.
    """
    stack = pattern_set.stack
    if (scene.width, scene.height) != (stack.width, stack.height):
        raise DimensionMismatch("scene and pattern set dimensions differ")
    if mode not in (MODE_RAW, MODE_COMPLEMENTARY):
        raise BadParam(f"unknown mode {mode!r}")
    total = float(scene.data.sum())
    blocks = []
    boundaries = [0]
    for map_, lk in zip(stack.maps, pattern_set.lookups):
        sums = region_sums_of_image(scene, map_)
        d_pos = lk.entries.astype(np.float64) @ sums
        if mode == MODE_RAW:
            blocks.append(d_pos)
        else:
            pair = np.empty(2 * d_pos.size)
            pair[0::2] = d_pos
            pair[1::2] = total - d_pos
            blocks.append(pair)
        boundaries.append(boundaries[-1] + blocks[-1].size)
    return MeasurementSet(
        values=np.concatenate(blocks),
        mode=mode,
        map_boundaries=tuple(boundaries[:-1]),
    )


def add_noise(ms: MeasurementSet, spec: NoiseSpec) -> MeasurementSet:
    """Zero-mean Gaussian noise with sigma = RMS(readings) * 10^(-snr_db/20)."""
    if spec.snr_db is None:
        return ms
    rms = float(np.sqrt(np.mean(ms.values**2)))
    sigma = rms * 10.0 ** (-spec.snr_db / 20.0)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    noisy = ms.values + rng.normal(0.0, sigma, size=ms.values.size)
    return MeasurementSet(
        values=noisy,
        mode=ms.mode,
        map_boundaries=ms.map_boundaries,
        snr_db=spec.snr_db,
        daq_bits=ms.daq_bits,
    )


def daq_quantize(
    ms: MeasurementSet, bits: int, full_scale: float | None = None
) -> MeasurementSet:
    """Round readings to the DAQ grid: step = full_scale / (2^bits - 1).

    Readings are clipped to [0, full_scale] in raw mode and to
    [-full_scale, full_scale] in complementary mode (differences taken later
    may be negative). full_scale defaults to the largest reading of the set.
    """
    if not 4 <= bits <= 24:
        raise BadParam(f"bits must be in [4, 24], got {bits}")
    if full_scale is None:
        full_scale = float(ms.values.max())
    if full_scale <= 0:
        raise BadParam(f"full_scale must be > 0, got {full_scale}")
    step = full_scale / (2**bits - 1)
    q = np.rint(ms.values / step) * step
    lo = 0.0 if ms.mode == MODE_RAW else -full_scale
    q = np.clip(q, lo, full_scale)
    return MeasurementSet(
        values=q,
        mode=ms.mode,
        map_boundaries=ms.map_boundaries,
        snr_db=ms.snr_db,
        daq_bits=bits,
    )
