import numpy as np
import pytest

from spilab.enhance import (
    EnhanceParams,
    detect_empty_regions,
    enhance,
    rescale_sweep,
)
from spilab.errors import BadParam
from spilab.model import (
    ImageMap,
    MapStack,
    RegionStats,
    SceneImage,
    region_means_of_image,
)
from spilab.recon import backproject_means, recover_region_stats
from spilab.sim import NoiseSpec, add_noise, forward_measure

ENHANCED_BLOCK = np.zeros((4, 4))
ENHANCED_BLOCK[:2, :2] = 0.375


def _toy_stats(toy4, toy4_patterns):
    ms = forward_measure(toy4["scene"], toy4_patterns)
    return recover_region_stats(ms, toy4_patterns)


def test_detect_empty_toy(toy4, toy4_patterns):
    stats = _toy_stats(toy4, toy4_patterns)
    pin = detect_empty_regions(stats, toy4["stack"], EnhanceParams())
    assert set(pin.empty) == {(0, 1), (1, 1)}
    assert pin.mask.sum() == 12
    assert not pin.mask[:2, :2].any()


def test_detect_empty_zero_scene(toy4, toy4_patterns):
    zero = SceneImage.from_array(np.zeros((4, 4)))
    stats = recover_region_stats(forward_measure(zero, toy4_patterns), toy4_patterns)
    pin = detect_empty_regions(stats, toy4["stack"], EnhanceParams())
    assert len(pin.empty) == 4
    assert pin.mask.all()


def test_detect_empty_noise_robust(toy4, toy4_patterns_identity):
    # identity look-ups sample each region directly; at 46 dB the empty set
    # never changes across 100 seeds
    ms = forward_measure(toy4["scene"], toy4_patterns_identity)
    hits = 0
    for seed in range(100):
        noisy = add_noise(ms, NoiseSpec(46.0, seed))
        stats = recover_region_stats(noisy, toy4_patterns_identity)
        pin = detect_empty_regions(stats, toy4["stack"], EnhanceParams())
        hits += set(pin.empty) == {(0, 1), (1, 1)}
    assert hits == 100


def test_rescale_toy_trace(toy4, toy4_patterns):
    stats = _toy_stats(toy4, toy4_patterns)
    pin = detect_empty_regions(stats, toy4["stack"], EnhanceParams())
    x0 = backproject_means(stats, toy4["stack"])
    x = x0.data.copy()
    x[pin.mask] = 0.0
    x, inconsistent = rescale_sweep(x, stats, toy4["stack"], pin, EnhanceParams())
    np.testing.assert_allclose(x, ENHANCED_BLOCK, atol=0)
    assert inconsistent == []


def test_rescale_fixed_point(toy4, toy4_patterns):
    stats = _toy_stats(toy4, toy4_patterns)
    pin = detect_empty_regions(stats, toy4["stack"], EnhanceParams())
    x, _ = rescale_sweep(
        ENHANCED_BLOCK.copy(), stats, toy4["stack"], pin, EnhanceParams()
    )
    np.testing.assert_allclose(x, ENHANCED_BLOCK, atol=1e-15)


def test_rescale_additive_branch(toy4):
    # region with zero current sum and measured sum 0.8 over 4 unpinned
    # pixels gains 0.2 per pixel
    from spilab.enhance import PinMask

    stack = MapStack(maps=(toy4["map_a"],))
    stats = RegionStats(sums=(np.array([0.8, 0.0]),), sizes=(np.array([8, 8]),))
    params = EnhanceParams()
    auto = detect_empty_regions(stats, stack, params)
    extra = np.zeros((4, 4), dtype=bool)
    extra[2:, :2] = True  # pin half of region 0 by hand
    pin = PinMask(mask=auto.mask | extra, empty=auto.empty, threshold=auto.threshold)
    out, _ = rescale_sweep(np.zeros((4, 4)), stats, stack, pin, params)
    np.testing.assert_allclose(out[:2, :2], 0.2, atol=0)
    assert not out[2:, :].any()


def test_rescale_reports_inconsistent_region(toy4):
    # map B's first region lies entirely inside map A's empty half, but its
    # measured sum is far from zero: reported and skipped
    map_a = toy4["map_a"]  # left/right halves
    labels_b = np.zeros((4, 4), dtype=int)
    labels_b[:, 2:] = 1  # same split; region 1 = right half
    map_b = ImageMap.from_labels(labels_b)
    stack = MapStack(maps=(map_a, map_b))
    stats = RegionStats(
        sums=(np.array([1.0, 0.0]), np.array([1.0, 0.8])),
        sizes=(np.array([8, 8]), np.array([8, 8])),
    )
    params = EnhanceParams()
    pin = detect_empty_regions(stats, stack, params)
    assert (0, 1) in pin.empty and (1, 1) not in pin.empty
    x = np.full((4, 4), 0.1)
    x[pin.mask] = 0.0
    _, inconsistent = rescale_sweep(x, stats, stack, pin, params)
    assert inconsistent == [(1, 1)]


def test_enhance_toy_converges_at_two(toy4, toy4_patterns):
    stats = _toy_stats(toy4, toy4_patterns)
    x0 = backproject_means(stats, toy4["stack"])
    out, report = enhance(x0, stats, toy4["stack"], EnhanceParams())
    np.testing.assert_allclose(out.data, ENHANCED_BLOCK, atol=0)
    assert report.iterations == 2
    assert report.max_change[-1] == 0.0
    assert report.converged


def test_enhance_k1_is_single_sweep(toy4, toy4_patterns):
    stats = _toy_stats(toy4, toy4_patterns)
    x0 = backproject_means(stats, toy4["stack"])
    out, report = enhance(x0, stats, toy4["stack"], EnhanceParams(max_iters=1))
    assert report.iterations == 1
    np.testing.assert_allclose(out.data, ENHANCED_BLOCK, atol=0)


def test_enhance_zero_scene_exact_zero(toy4, toy4_patterns):
    zero = SceneImage.from_array(np.zeros((4, 4)))
    stats = recover_region_stats(forward_measure(zero, toy4_patterns), toy4_patterns)
    x0 = backproject_means(stats, toy4["stack"])
    out, report = enhance(x0, stats, toy4["stack"], EnhanceParams())
    assert np.abs(out.data).max() == 0.0
    assert report.converged


def test_enhance_pins_stay_zero(desk):
    from spilab.scenes import SceneSpec, gen_lineart

    scene = gen_lineart(256, 192, SceneSpec(kind="lineart", seed=23))
    ms = forward_measure(scene, desk["patterns"])
    stats = recover_region_stats(ms, desk["patterns"])
    pin = detect_empty_regions(stats, desk["stack"], EnhanceParams())
    assert pin.mask.any()  # clustered sparse scenes leave empty regions
    x0 = backproject_means(stats, desk["stack"])
    x = x0.data.copy()
    x[pin.mask] = 0.0
    for _ in range(3):
        x, _ = rescale_sweep(x, stats, desk["stack"], pin, EnhanceParams())
        assert np.all(x[pin.mask] == 0.0)


def test_enhance_last_map_means_consistent(desk):
    # noiseless: after a sweep the most recently processed map reproduces
    # the measured means on its non-empty regions
    rng = np.random.default_rng(29)
    scene = rng.random((192, 256)) * (rng.random((192, 256)) < 0.03)
    scene = SceneImage.from_array(scene)
    ms = forward_measure(scene, desk["patterns"])
    stats = recover_region_stats(ms, desk["patterns"])
    params = EnhanceParams(clamp_nonneg=False)
    pin = detect_empty_regions(stats, desk["stack"], params)
    x0 = backproject_means(stats, desk["stack"])
    x = x0.data.copy()
    x[pin.mask] = 0.0
    x, _ = rescale_sweep(x, stats, desk["stack"], pin, params)
    last = len(desk["stack"].maps) - 1
    map_ = desk["stack"].maps[last]
    img = SceneImage.from_array(np.where(pin.mask, 0.0, x))
    got = region_means_of_image(img, map_)
    want = stats.means[last]
    empty_last = {r for (m, r) in pin.empty if m == last}
    keep = [r for r in range(map_.region_count) if r not in empty_last]
    np.testing.assert_allclose(got[keep], want[keep], rtol=1e-9)


def test_enhance_idempotent_at_fixpoint(toy4, toy4_patterns):
    stats = _toy_stats(toy4, toy4_patterns)
    fixed = SceneImage.from_array(ENHANCED_BLOCK)
    out, report = enhance(fixed, stats, toy4["stack"], EnhanceParams())
    assert np.abs(out.data - ENHANCED_BLOCK).max() <= 1e-12
    assert report.iterations == 1


def test_enhance_params_validation():
    with pytest.raises(BadParam):
        EnhanceParams(max_iters=0)
    with pytest.raises(BadParam):
        EnhanceParams(tau_rel=-0.1)
