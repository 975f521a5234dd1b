"""Look-up matrix construction and sampling pattern materialization.

Each map gets one invertible binary R x R look-up matrix whose rows select
region subsets covering close to 50% of the pixels. Construction is a
deterministic restart loop: sample a random binary matrix, greedily repair
each row toward the 50% band, reject numerically singular candidates.
Structured (Hadamard-style) matrices are not used because R is arbitrary
after empty-bin compaction.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import BadParam, BalanceUnachievable
from .model import (
    ImageMap,
    LookupMatrix,
    MapStack,
    lookup_is_invertible,
    region_sizes,
    split_seed,
)

MAX_TRIES = 1000
#: Valid candidates examined per map: the builder keeps the one whose
#: inverse injects the least solve noise (mean squared inverse-row norm,
#: relative to sampling each region directly) and stops early once that
#: gain is at or below NOISE_GAIN_TARGET.
SEARCH_BUDGET = 64
NOISE_GAIN_TARGET = 1.0


@dataclass(frozen=True)
class PatternSet:
    """A map stack paired with one look-up matrix per map."""

    stack: MapStack
    lookups: tuple
    balance: tuple  # per map: on-pixel fraction per row

    def __post_init__(self):
        if len(self.lookups) != len(self.stack.maps):
            raise BadParam("one look-up matrix required per map")
        for m, lk in zip(self.stack.maps, self.lookups):
            if lk.R != m.region_count:
                raise BadParam("look-up size must equal the map's region count")
        object.__setattr__(self, "lookups", tuple(self.lookups))
        object.__setattr__(
            self,
            "balance",
            tuple(np.asarray(b, dtype=np.float64) for b in self.balance),
        )

    @property
    def pattern_count(self) -> int:
        """Raw-mode pattern count (one row per region over all maps)."""
        return sum(lk.R for lk in self.lookups)

    def balance_rows(self) -> list[tuple[int, int, float]]:
        """(map, row, on_fraction) triples for the balance report CSV."""
        return [
            (m, r, float(frac))
            for m, fracs in enumerate(self.balance)
            for r, frac in enumerate(fracs)
        ]


def row_pixel_fraction(row: np.ndarray, sizes: np.ndarray) -> float:
    """Fraction of raster pixels covered by the selected regions."""
    sizes = np.asarray(sizes, dtype=np.float64)
    return float(np.dot(np.asarray(row, dtype=np.float64), sizes) / sizes.sum())


def repair_row_balance(
    row: np.ndarray, sizes: np.ndarray, beta: float
) -> np.ndarray:
    """Greedy single-region toggles toward on-pixel fraction 0.5.

    Each step applies the toggle minimizing |fraction - 0.5| (ties go to the
    lowest region index) and stops when the fraction is within
    [0.5 - beta, 0.5 + beta] or no toggle improves; the best-effort row is
    returned either way.
    """
    row = np.asarray(row, dtype=np.uint8).copy()
    sizes = np.asarray(sizes, dtype=np.float64)
    total = sizes.sum()
    frac = float(np.dot(row, sizes) / total)
    while abs(frac - 0.5) > beta:
        candidates = frac + (1.0 - 2.0 * row) * sizes / total
        best = int(np.argmin(np.abs(candidates - 0.5)))
        if abs(candidates[best] - 0.5) >= abs(frac - 0.5):
            break
        row[best] ^= 1
        frac = float(candidates[best])
    return row


def _row_sum_bounds(R: int) -> tuple[int, int]:
    quarter = -(-R // 4)
    return R // 2 - quarter, -(-R // 2) + quarter


def _exhaustive_small(sizes: np.ndarray, beta: float) -> tuple[np.ndarray, bool]:
    """Best invertible matrix for R <= 2 by enumeration.

    Returns (entries, within_band). When no invertible candidate meets the
    balance band the beta constraint is waived and the candidate minimizing
    the worst row deviation from 0.5 wins (R=1 is always the waived [[1]]).
    """
    R = sizes.size
    if R == 1:
        return np.ones((1, 1), dtype=np.uint8), False
    best = None
    best_key = None
    best_in_band = False
    for bits in product((0, 1), repeat=R * R):
        cand = np.array(bits, dtype=np.uint8).reshape(R, R)
        if not lookup_is_invertible(cand):
            continue
        lo, hi = _row_sum_bounds(R)
        rs = cand.sum(axis=1)
        if rs.min() < lo or rs.max() > hi:
            continue
        devs = [abs(row_pixel_fraction(r, sizes) - 0.5) for r in cand]
        in_band = max(devs) <= beta
        key = (not in_band, max(devs), sum(devs))
        if best_key is None or key < best_key:
            best, best_key, best_in_band = cand, key, in_band
    assert best is not None  # identity is always invertible
    return best, best_in_band


def noise_gain(entries: np.ndarray) -> float:
    """Mean squared inverse-row norm: variance of the recovered region sums
    relative to measuring each region directly, under unit reading noise."""
    inv = np.linalg.inv(np.asarray(entries, dtype=np.float64))
    return float(np.sum(inv**2) / inv.shape[0])


def build_lookup_matrix(
    map_: ImageMap, beta: float, seed: int
) -> tuple[LookupMatrix, np.ndarray]:
    """Invertible balanced look-up matrix for one map, plus row fractions.

    Among the valid candidates of the restart sequence the one with the
    lowest solve-noise gain wins; random binary matrices have a heavy
    conditioning tail that would otherwise dominate region recovery at
    realistic detector SNR. Deterministic given the seed. Raises
    BalanceUnachievable when no candidate reaches the band within MAX_TRIES
    restarts (R >= 3; for R <= 2 the band is waived when arithmetic
    forbids it).
    """
    if not (0 < beta < 0.5):
        raise BadParam(f"beta must be in (0, 0.5), got {beta}")
    sizes = region_sizes(map_).astype(np.float64)
    R = sizes.size
    if R <= 2:
        entries, _ = _exhaustive_small(sizes, beta)
        lk = LookupMatrix(R=R, entries=entries)
        fracs = np.array([row_pixel_fraction(r, sizes) for r in entries])
        return lk, fracs

    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = _row_sum_bounds(R)
    n_unbalanced = n_singular = n_valid = 0
    best = None
    best_gain = np.inf
    best_fracs = None
    for _ in range(MAX_TRIES):
        cand = rng.integers(0, 2, size=(R, R), dtype=np.uint8)
        cand = np.array([repair_row_balance(row, sizes, beta) for row in cand])
        fracs = np.array([row_pixel_fraction(r, sizes) for r in cand])
        rs = cand.sum(axis=1)
        if np.max(np.abs(fracs - 0.5)) > beta or rs.min() < lo or rs.max() > hi:
            n_unbalanced += 1
            continue
        if not lookup_is_invertible(cand):
            n_singular += 1
            continue
        n_valid += 1
        gain = noise_gain(cand)
        if gain < best_gain:
            best, best_gain, best_fracs = cand, gain, fracs
        if best_gain <= NOISE_GAIN_TARGET or n_valid >= SEARCH_BUDGET:
            break
    if best is None:
        raise BalanceUnachievable(
            f"no balanced invertible look-up in {MAX_TRIES} tries for R={R} "
            f"(unbalanced {n_unbalanced}, singular {n_singular})"
        )
    return LookupMatrix(R=R, entries=best), best_fracs


def materialize_pattern(map_: ImageMap, lookup_row: np.ndarray) -> np.ndarray:
    """Binary pixel mask: pattern(p) = row[label(p)]."""
    row = np.asarray(lookup_row, dtype=np.uint8)
    if row.size != map_.region_count:
        raise BadParam("row length must equal the map's region count")
    return row[map_.labels]


def build_pattern_set(stack: MapStack, beta: float, seed: int) -> PatternSet:
    """One look-up per map, with per-map seeds split from ``seed``."""
    lookups = []
    balance = []
    for m, map_ in enumerate(stack.maps):
        try:
            lk, fracs = build_lookup_matrix(map_, beta, split_seed(seed, m))
        except BalanceUnachievable as exc:
            raise BalanceUnachievable(f"map {m}: {exc}") from exc
        lookups.append(lk)
        balance.append(fracs)
    return PatternSet(stack=stack, lookups=tuple(lookups), balance=tuple(balance))
