"""Stage-one reconstruction.

Region sums come back from solving each map's look-up system; the fast
initial image is the per-pixel mean of the recovered region means over all
maps (one pass, equivalent to a single matrix-vector product). A dense
Tikhonov pseudoinverse over the stacked pattern masks is provided as a
desk-scale reference operator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BadParam, BlockMismatch, SingularMatrix, TooLarge
from .model import (
    MODE_COMPLEMENTARY,
    MODE_RAW,
    MapStack,
    MeasurementSet,
    RegionStats,
    SceneImage,
    region_sizes,
)
from .patterns import PatternSet, materialize_pattern

DENSE_PIXEL_GUARD = 65536
DEFAULT_ALPHA = 1e-4


def _expected_boundaries(pattern_set: PatternSet, mode: str) -> tuple:
    per_map = 1 if mode == MODE_RAW else 2
    offsets = [0]
    for lk in pattern_set.lookups[:-1]:
        offsets.append(offsets[-1] + per_map * lk.R)
    return tuple(offsets)


def raw_projections(
    ms: MeasurementSet, pattern_set: PatternSet, per_pattern_total: bool = False
) -> list[np.ndarray]:
    """Per-map right-hand sides of the look-up systems.

    Raw mode passes blocks through. Complementary mode reduces each
    (d+, d-) pair to (d+ - d- + T)/2 where T estimates the total scene
    intensity; by default T is the mean of d+ + d- over every pair in the
    set, which averages detector noise (set per_pattern_total to use each
    pair's own sum instead).
    """
    expected = _expected_boundaries(pattern_set, ms.mode)
    if ms.map_boundaries != expected:
        raise BlockMismatch(
            f"block offsets {ms.map_boundaries} do not match pattern set "
            f"(expected {expected})"
        )
    n_expected = sum(
        (1 if ms.mode == MODE_RAW else 2) * lk.R for lk in pattern_set.lookups
    )
    if ms.values.size != n_expected:
        raise BlockMismatch(
            f"{ms.values.size} readings, pattern set implies {n_expected}"
        )
    if ms.mode == MODE_RAW:
        return [np.array(ms.block(m)) for m in range(len(pattern_set.lookups))]
    blocks = [ms.block(m) for m in range(len(pattern_set.lookups))]
    total_hat = float(np.mean(np.concatenate([b[0::2] + b[1::2] for b in blocks])))
    out = []
    for b in blocks:
        t = (b[0::2] + b[1::2]) if per_pattern_total else total_hat
        out.append((b[0::2] - b[1::2] + t) / 2.0)
    return out


def recover_region_stats(
    ms: MeasurementSet, pattern_set: PatternSet, per_pattern_total: bool = False
) -> RegionStats:
    """Solve each map's look-up system for the per-region sums."""
    rhs = raw_projections(ms, pattern_set, per_pattern_total)
    sums = []
    sizes = []
    for m, (map_, lk, y) in enumerate(
        zip(pattern_set.stack.maps, pattern_set.lookups, rhs)
    ):
        a = lk.entries.astype(np.float64)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
            if np.abs(np.diag(lu)).min() < 1e-8 * np.abs(a).max():
                raise SingularMatrix(f"look-up system for map {m} is singular")
            s = scipy.linalg.lu_solve((lu, piv), y, check_finite=False)
        sums.append(s)
        sizes.append(region_sizes(map_))
    return RegionStats(sums=tuple(sums), sizes=tuple(sizes))


def backproject_means(stats: RegionStats, stack: MapStack) -> SceneImage:
    """Initial image: per-pixel mean of the region means across maps."""
    if stats.map_count != len(stack.maps):
        raise BadParam("stats and stack disagree on map count")
    acc = np.zeros((stack.height, stack.width))
    for mean, map_ in zip(stats.means, stack.maps):
        acc += mean[map_.labels]
    return SceneImage(
        width=stack.width, height=stack.height, data=acc / len(stack.maps)
    )


@dataclass(frozen=True)
class InverseOperator:
    """A single linear map from readings to the initial image."""

    kind: str  # "backproject" | "tikhonov"
    pattern_set: PatternSet
    alpha: float | None = None
    apply_matrix: np.ndarray | None = None  # (N, M) for the tikhonov kind

    def __post_init__(self):
        if self.kind not in ("backproject", "tikhonov"):
            raise BadParam(f"unknown inverse kind {self.kind!r}")
        if self.kind == "tikhonov" and self.apply_matrix is None:
            raise BadParam("tikhonov operator requires its dense apply matrix")


def build_backproject(pattern_set: PatternSet) -> InverseOperator:
    return InverseOperator(kind="backproject", pattern_set=pattern_set)


def build_tikhonov(pattern_set: PatternSet, alpha: float = DEFAULT_ALPHA) -> InverseOperator:
    """Dense x0 = P^T (P P^T + lambda I)^-1 y over the stacked pattern masks.

    lambda = alpha * mean(diag(P P^T)) so alpha is resolution independent.
    Guarded to rasters of at most DENSE_PIXEL_GUARD pixels.
    """
    if alpha <= 0:
        raise BadParam(f"alpha must be > 0, got {alpha}")
    stack = pattern_set.stack
    n = stack.width * stack.height
    if n > DENSE_PIXEL_GUARD:
        raise TooLarge(f"{n} pixels exceeds the dense-operator guard {DENSE_PIXEL_GUARD}")
    rows = []
    for map_, lk in zip(stack.maps, pattern_set.lookups):
        for row in lk.entries:
            rows.append(materialize_pattern(map_, row).ravel().astype(np.float64))
    p = np.array(rows)
    gram = p @ p.T
    lam = alpha * float(np.mean(np.diag(gram)))
    # spectral inverse: stays consistent on rank-deficient pattern sets even
    # for vanishing regularization, where a Cholesky solve leaks roundoff
    # into the null space
    w, v = scipy.linalg.eigh(gram, check_finite=False)
    ginv = (v / (np.maximum(w, 0.0) + lam)) @ v.T
    return InverseOperator(
        kind="tikhonov",
        pattern_set=pattern_set,
        alpha=alpha,
        apply_matrix=p.T @ ginv,
    )


def apply_inverse(op: InverseOperator, ms: MeasurementSet) -> SceneImage:
    """Apply the operator to a measurement set (single matrix-vector product)."""
    if op.kind == "backproject":
        stats = recover_region_stats(ms, op.pattern_set)
        return backproject_means(stats, op.pattern_set.stack)
    y = np.concatenate(raw_projections(ms, op.pattern_set))
    stack = op.pattern_set.stack
    x = op.apply_matrix @ y
    return SceneImage(
        width=stack.width, height=stack.height, data=x.reshape(stack.height, stack.width)
    )
