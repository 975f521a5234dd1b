"""Core data model: images, maps, look-up matrices, measurements, region stats.

All types are immutable value objects (backing arrays are frozen at
construction), so every operation here is a pure function and instances can
be shared freely across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import BadParam, DimensionMismatch

MODE_RAW = "raw"
MODE_COMPLEMENTARY = "complementary"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SceneImage:
    """Real-valued intensity raster, row-major, nominal range [0, 1]."""

    width: int
    height: int
    data: np.ndarray  # shape (height, width), float64

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise BadParam("image dimensions must be >= 1")
        a = np.asarray(self.data, dtype=np.float64)
        if a.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"data shape {a.shape} != (height, width)=({self.height}, {self.width})"
            )
        if not np.all(np.isfinite(a)):
            raise BadParam("image contains non-finite values")
        object.__setattr__(self, "data", _frozen(a))

    @classmethod
    def from_array(cls, a: np.ndarray) -> "SceneImage":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise BadParam("expected a 2-D array")
        return cls(width=a.shape[1], height=a.shape[0], data=a)

    @property
    def pixel_count(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class ImageMap:
    """Per-pixel region labels partitioning the raster into R regions.

    Labels are in [0, R-1] and every id occurs at least once; regions need
    not be spatially connected.
    """

    width: int
    height: int
    labels: np.ndarray  # shape (height, width), int32
    region_count: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise BadParam("map dimensions must be >= 1")
        lab = np.asarray(self.labels, dtype=np.int32)
        if lab.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"labels shape {lab.shape} != ({self.height}, {self.width})"
            )
        object.__setattr__(self, "labels", _frozen(lab))
        report = validate_map(self)
        if report:
            raise BadParam("invalid map: " + "; ".join(report))

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "ImageMap":
        lab = np.asarray(labels, dtype=np.int32)
        return cls(
            width=lab.shape[1],
            height=lab.shape[0],
            labels=lab,
            region_count=int(lab.max()) + 1,
        )


@dataclass(frozen=True)
class MapStack:
    """Ordered image maps over one raster; together they define the sensing scheme."""

    maps: tuple
    seed: int = 0
    params: tuple = ()  # (characteristic_size, levels) per map, informational

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise BadParam("map stack must contain at least one map")
        w, h = maps[0].width, maps[0].height
        for m in maps:
            if (m.width, m.height) != (w, h):
                raise DimensionMismatch("all maps in a stack must share dimensions")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def width(self) -> int:
        return self.maps[0].width

    @property
    def height(self) -> int:
        return self.maps[0].height

    @property
    def total_regions(self) -> int:
        return sum(m.region_count for m in self.maps)


#: Upper bound used by the look-up invertibility check: reject a candidate
#: matrix when any LU pivot is below PIVOT_REL * max|entry| or when the
#: 1-norm condition estimate exceeds COND_MAX.
PIVOT_REL = 1e-8
COND_MAX = 1e8


@dataclass(frozen=True)
class LookupMatrix:
    """Binary R x R matrix; row = sampling pattern, column = region."""

    R: int
    entries: np.ndarray  # shape (R, R), uint8 in {0, 1}

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.uint8)
        if e.shape != (self.R, self.R):
            raise BadParam(f"entries shape {e.shape} != ({self.R}, {self.R})")
        if not np.all((e == 0) | (e == 1)):
            raise BadParam("entries must be binary")
        row_sums = e.sum(axis=1)
        lo = self.R // 2 - int(np.ceil(self.R / 4))
        hi = -(-self.R // 2) + int(np.ceil(self.R / 4))
        if np.any(row_sums < lo) or np.any(row_sums > hi):
            raise BadParam(
                f"row sums {row_sums.tolist()} outside [{lo}, {hi}] for R={self.R}"
            )
        if not lookup_is_invertible(e):
            raise BadParam("look-up matrix is numerically singular")
        object.__setattr__(self, "entries", _frozen(e))


def lookup_is_invertible(entries: np.ndarray) -> bool:
    """LU pivot / condition check used to accept a binary look-up matrix."""
    a = np.asarray(entries, dtype=np.float64)
    maxabs = np.abs(a).max()
    if maxabs == 0:
        return False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # singular candidates are expected here
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.min() < PIVOT_REL * maxabs:
            return False
        # 1-norm condition estimate via the explicit inverse; R stays small
        # (a few hundred at most) so this is cheap.
        inv = scipy.linalg.lu_solve((lu, piv), np.eye(a.shape[0]), check_finite=False)
    cond = np.linalg.norm(a, 1) * np.linalg.norm(inv, 1)
    return bool(cond <= COND_MAX)


@dataclass(frozen=True)
class MeasurementSet:
    """Ordered detector readings plus acquisition provenance.

    ``map_boundaries`` holds the offset of each map's block inside
    ``values``; raw mode stores one reading per pattern, complementary mode
    stores interleaved (positive, complement) pairs.
    """

    values: np.ndarray
    mode: str
    map_boundaries: tuple
    snr_db: float | None = None
    daq_bits: int | None = None

    def __post_init__(self):
        if self.mode not in (MODE_RAW, MODE_COMPLEMENTARY):
            raise BadParam(f"unknown measurement mode {self.mode!r}")
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise BadParam("values must be a flat vector")
        object.__setattr__(self, "values", _frozen(v))
        bounds = tuple(int(b) for b in self.map_boundaries)
        if not bounds or bounds[0] != 0 or list(bounds) != sorted(bounds):
            raise BadParam("map_boundaries must start at 0 and be non-decreasing")
        if bounds[-1] > v.size:
            raise BadParam("map_boundaries exceed the number of readings")
        object.__setattr__(self, "map_boundaries", bounds)

    @property
    def pattern_count_displayed(self) -> int:
        return int(self.values.size)

    def block(self, map_index: int) -> np.ndarray:
        bounds = list(self.map_boundaries) + [self.values.size]
        return self.values[bounds[map_index] : bounds[map_index + 1]]


@dataclass(frozen=True)
class RegionStats:
    """Recovered per-region sums, sizes and means for each map of a stack."""

    sums: tuple  # one float64 vector per map
    sizes: tuple  # one int64 vector per map

    def __post_init__(self):
        sums = tuple(_frozen(np.asarray(s, dtype=np.float64)) for s in self.sums)
        sizes = tuple(_frozen(np.asarray(s, dtype=np.int64)) for s in self.sizes)
        if len(sums) != len(sizes):
            raise BadParam("sums and sizes must have one entry per map")
        for s, n in zip(sums, sizes):
            if s.shape != n.shape:
                raise BadParam("per-map sums and sizes must align")
        object.__setattr__(self, "sums", sums)
        object.__setattr__(self, "sizes", sizes)

    @property
    def means(self) -> tuple:
        return tuple(s / n for s, n in zip(self.sums, self.sizes))

    @property
    def map_count(self) -> int:
        return len(self.sums)

    @classmethod
    def from_image(cls, img: SceneImage, stack: MapStack) -> "RegionStats":
        """Ground-truth stats by direct per-region accumulation."""
        sums = []
        sizes = []
        for m in stack.maps:
            sums.append(region_sums_of_image(img, m))
            sizes.append(region_sizes(m))
        return cls(sums=tuple(sums), sizes=tuple(sizes))


def region_sizes(map_: ImageMap) -> np.ndarray:
    """Pixel count per region id."""
    return np.bincount(map_.labels.ravel(), minlength=map_.region_count).astype(
        np.int64
    )


def region_sums_of_image(img: SceneImage, map_: ImageMap) -> np.ndarray:
    if (img.width, img.height) != (map_.width, map_.height):
        raise DimensionMismatch("image and map dimensions differ")
    return np.bincount(
        map_.labels.ravel(), weights=img.data.ravel(), minlength=map_.region_count
    )


def region_means_of_image(img: SceneImage, map_: ImageMap) -> np.ndarray:
    """Mean pixel value within each region of the map."""
    return region_sums_of_image(img, map_) / region_sizes(map_)


def validate_map(map_: ImageMap) -> list[str]:
    """Report label range violations and unused region ids; empty list = ok."""
    violations = []
    lab = np.asarray(map_.labels)
    lo, hi = int(lab.min()), int(lab.max())
    if lo < 0:
        violations.append(f"negative label {lo}")
    if hi >= map_.region_count:
        violations.append(f"label {hi} >= region_count {map_.region_count}")
    present = np.zeros(max(map_.region_count, hi + 1), dtype=bool)
    present[lab.ravel()] = True
    unused = np.nonzero(~present[: map_.region_count])[0]
    for r in unused:
        violations.append(f"region id {int(r)} unused")
    return violations


def compact_labels(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Remap labels onto 0..K-1 preserving ascending id order; drops unused ids."""
    uniq, inverse = np.unique(np.asarray(labels), return_inverse=True)
    return inverse.reshape(np.asarray(labels).shape).astype(np.int32), int(uniq.size)


def split_seed(master_seed: int, index: int) -> int:
    """Derive a per-item 64-bit seed: master XOR (index+1) * golden-ratio constant."""
    return (int(master_seed) ^ ((index + 1) * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF


def as_scene(data: np.ndarray | Sequence[Sequence[float]]) -> SceneImage:
    return SceneImage.from_array(np.asarray(data, dtype=np.float64))
