"""Stage-two iterative enhancement.

Regions whose recovered mean magnitude falls below a threshold are declared
empty and their pixels pinned to zero for the whole run. Each iteration then
sweeps the maps in stack order and rescales every non-empty region so the
unpinned pixels reproduce the measured region sum; overlapping constraints
from different maps are reconciled by cycling (projection-style), which is
why a handful of iterations suffice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadParam
from .model import MapStack, RegionStats, SceneImage


@dataclass(frozen=True)
class EnhanceParams:
    tau_rel: float = 0.02
    tau_abs: float = 0.0
    max_iters: int = 5
    stop_tol: float = 1e-4
    clamp_nonneg: bool = True
    clamp_unit: bool = False

    def __post_init__(self):
        if self.tau_rel < 0 or self.tau_abs < 0:
            raise BadParam("thresholds must be >= 0")
        if self.max_iters < 1:
            raise BadParam("max_iters must be >= 1")


@dataclass(frozen=True)
class PinMask:
    """Pixels forced to zero: the union of all empty regions."""

    mask: np.ndarray  # bool, (height, width)
    empty: tuple  # (map_index, region_id) pairs
    threshold: float

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)
        object.__setattr__(self, "empty", tuple(self.empty))


@dataclass
class EnhanceReport:
    iterations: int = 0
    max_change: list = field(default_factory=list)
    empty_regions: list = field(default_factory=list)
    inconsistencies: list = field(default_factory=list)
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "max_change": self.max_change,
            "empty_regions": [list(p) for p in self.empty_regions],
            "inconsistencies": [list(p) for p in self.inconsistencies],
            "converged": self.converged,
        }


def detect_empty_regions(
    stats: RegionStats, stack: MapStack, params: EnhanceParams
) -> PinMask:
    """Empty regions are those with |mean| <= max(tau_rel * max|mean|, tau_abs)."""
    means = stats.means
    peak = max(float(np.abs(mu).max()) for mu in means)
    tau = max(params.tau_rel * peak, params.tau_abs)
    mask = np.zeros((stack.height, stack.width), dtype=bool)
    empty = []
    for m, (mu, map_) in enumerate(zip(means, stack.maps)):
        empty_ids = np.nonzero(np.abs(mu) <= tau)[0]
        for r in empty_ids:
            empty.append((m, int(r)))
        if empty_ids.size:
            is_empty = np.zeros(map_.region_count, dtype=bool)
            is_empty[empty_ids] = True
            mask |= is_empty[map_.labels]
    return PinMask(mask=mask, empty=tuple(empty), threshold=tau)


def rescale_sweep(
    x: np.ndarray,
    stats: RegionStats,
    stack: MapStack,
    pin: PinMask,
    params: EnhanceParams,
) -> tuple[np.ndarray, list]:
    """One cyclic pass over all maps restoring measured sums in non-empty regions.

    Pinned pixels stay exactly zero. A region whose unpinned sum is
    effectively zero gets the additive fallback (equal share per unpinned
    pixel); a fully pinned region with a non-negligible measured sum is
    reported as inconsistent and skipped. Clamping happens once, after the
    full sweep.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    unpinned = ~pin.mask
    empty_by_map = {}
    for m, r in pin.empty:
        empty_by_map.setdefault(m, set()).add(r)
    inconsistencies = []
    for m, (map_, sums, sizes) in enumerate(zip(stack.maps, stats.sums, stats.sizes)):
        R = map_.region_count
        labels = map_.labels
        n_unpinned = np.bincount(labels[unpinned], minlength=R)
        c = np.bincount(labels[unpinned], weights=x[unpinned], minlength=R)
        factor = np.ones(R)
        addend = np.zeros(R)
        empty_here = empty_by_map.get(m, set())
        for r in range(R):
            if r in empty_here:
                continue
            if n_unpinned[r] == 0:
                if sums[r] > pin.threshold * sizes[r]:
                    inconsistencies.append((m, r))
                continue
            delta = 1e-12 * sizes[r]
            if c[r] > delta:
                factor[r] = sums[r] / c[r]
            else:
                addend[r] = sums[r] / n_unpinned[r]
        x = x * factor[labels] + addend[labels] * unpinned
    if params.clamp_nonneg:
        np.maximum(x, 0.0, out=x)
    if params.clamp_unit:
        np.minimum(x, 1.0, out=x)
    x[pin.mask] = 0.0
    return x, inconsistencies


def enhance(
    x0: SceneImage,
    stats: RegionStats,
    stack: MapStack,
    params: EnhanceParams = EnhanceParams(),
) -> tuple[SceneImage, EnhanceReport]:
    """Pin empty regions once, then sweep up to max_iters times.

    Stops early when the largest pixel change falls below
    stop_tol * max|x|, or exactly at a fixed point (a sweep is a
    deterministic function of x, so zero change is final).
    """
    if (x0.width, x0.height) != (stack.width, stack.height):
        raise BadParam("initial image and stack dimensions differ")
    pin = detect_empty_regions(stats, stack, params)
    report = EnhanceReport(empty_regions=list(pin.empty))
    x = x0.data.copy()
    x[pin.mask] = 0.0
    for _ in range(params.max_iters):
        x_next, inconsistent = rescale_sweep(x, stats, stack, pin, params)
        change = float(np.abs(x_next - x).max())
        report.iterations += 1
        report.max_change.append(change)
        for pair in inconsistent:
            if pair not in report.inconsistencies:
                report.inconsistencies.append(pair)
        x = x_next
        if change == 0.0 or change < params.stop_tol * float(np.abs(x).max()):
            report.converged = True
            break
    return SceneImage(width=stack.width, height=stack.height, data=x), report
