"""Shared fixtures.

toy4 is the hand-checkable 4x4 fixture used across modules: map A splits
the raster into left/right halves, map B into top/bottom halves, and the
scene has (0,0)=1.0, (0,1)=0.5, zeros elsewhere. Every derived number in
the tests below (region sums 1.5/0, backprojection blocks 0.1875/0.09375/0,
enhanced block 0.375) was verified by direct accumulation.
"""

import numpy as np
import pytest

from spilab.config import default_desk_config
from spilab.mapgen import build_map_stack
from spilab.model import ImageMap, LookupMatrix, MapStack, SceneImage
from spilab.patterns import PatternSet, build_pattern_set


@pytest.fixture(scope="session")
def toy4():
    map_a = ImageMap.from_labels(np.array([[0, 0, 1, 1]] * 4))
    map_b = ImageMap.from_labels(np.array([[0] * 4, [0] * 4, [1] * 4, [1] * 4]))
    stack = MapStack(maps=(map_a, map_b))
    scene = np.zeros((4, 4))
    scene[0, 0] = 1.0
    scene[0, 1] = 0.5
    return {
        "map_a": map_a,
        "map_b": map_b,
        "stack": stack,
        "scene": SceneImage.from_array(scene),
    }


def _pattern_set(stack, entries):
    from spilab.model import region_sizes
    from spilab.patterns import row_pixel_fraction

    lookups = tuple(
        LookupMatrix(R=2, entries=np.array(entries, dtype=np.uint8))
        for _ in stack.maps
    )
    balance = tuple(
        np.array([row_pixel_fraction(r, region_sizes(m)) for r in lk.entries])
        for m, lk in zip(stack.maps, lookups)
    )
    return PatternSet(stack=stack, lookups=lookups, balance=balance)


@pytest.fixture(scope="session")
def toy4_patterns(toy4):
    """Fixture look-up [[1,0],[1,1]] on both maps."""
    return _pattern_set(toy4["stack"], [[1, 0], [1, 1]])


@pytest.fixture(scope="session")
def toy4_patterns_identity(toy4):
    """Identity look-up variant: patterns sample each region directly."""
    return _pattern_set(toy4["stack"], [[1, 0], [0, 1]])


@pytest.fixture(scope="session")
def desk():
    """Shared desk-scale sensing scheme (256x192, 10 maps, 20 levels)."""
    cfg = default_desk_config()
    stack = build_map_stack(
        cfg.width, cfg.height, [(p.l, p.q) for p in cfg.maps], cfg.seeds.maps
    )
    pattern_set = build_pattern_set(stack, cfg.beta, cfg.seeds.patterns)
    return {"config": cfg, "stack": stack, "patterns": pattern_set}
