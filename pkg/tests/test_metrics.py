import math

import numpy as np
import pytest

from spilab.errors import DimensionMismatch, TooSmall
from spilab.metrics import compare, psnr, ssim
from spilab.model import SceneImage

# frozen against an independent reference implementation (scikit-image
# structural_similarity with Wang et al. settings)
CHECKERBOARD_SSIM = -0.9964064683569571


def _img(a):
    return SceneImage.from_array(np.asarray(a, dtype=float))


def test_psnr_identical_is_infinite():
    rng = np.random.default_rng(0)
    img = _img(rng.random((16, 16)))
    assert psnr(img, img) == math.inf


def test_psnr_uniform_offsets():
    base = _img(np.zeros((8, 8)))
    assert abs(psnr(base, _img(np.full((8, 8), 0.1))) - 20.0) < 1e-12
    assert abs(psnr(base, _img(np.full((8, 8), 0.5))) - 10 * math.log10(4)) < 1e-12


def test_psnr_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        psnr(_img(np.zeros((4, 4))), _img(np.zeros((4, 5))))


def test_psnr_monotone_in_error_scale():
    rng = np.random.default_rng(1)
    ref = _img(rng.random((20, 20)))
    err = rng.normal(0, 0.05, (20, 20))
    p1 = psnr(ref, _img(ref.data + err))
    p2 = psnr(ref, _img(ref.data + 1.5 * err))
    assert p2 < p1


def test_ssim_identical():
    rng = np.random.default_rng(2)
    img = _img(rng.random((32, 32)))
    assert abs(ssim(img, img) - 1.0) < 1e-12


def test_ssim_constant_images():
    a = _img(np.full((16, 16), 0.5))
    b = _img(np.full((16, 16), 0.5))
    assert abs(ssim(a, b) - 1.0) < 1e-12


def test_ssim_checkerboard_anticorrelated():
    cb = (np.indices((64, 64)).sum(axis=0) % 2).astype(float)
    score = ssim(_img(cb), _img(1.0 - cb))
    assert score < 0
    assert abs(score - CHECKERBOARD_SSIM) < 1e-6


def test_ssim_symmetry_and_bound():
    rng = np.random.default_rng(3)
    a = _img(rng.random((24, 40)))
    b = _img(np.clip(a.data + rng.normal(0, 0.1, (24, 40)), 0, 1))
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
    assert ssim(a, b) <= 1.0


def test_ssim_matches_reference_implementation():
    skimage_metrics = pytest.importorskip("skimage.metrics")
    rng = np.random.default_rng(4)
    for _ in range(3):
        x = rng.random((48, 70))
        y = np.clip(x + rng.normal(0, 0.2, x.shape), 0, 1)
        ours = ssim(_img(x), _img(y))
        theirs = skimage_metrics.structural_similarity(
            x, y, data_range=1.0, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False,
        )
        assert ours == pytest.approx(theirs, abs=1e-12)


def test_ssim_too_small():
    with pytest.raises(TooSmall):
        ssim(_img(np.zeros((10, 10))), _img(np.zeros((10, 10))))


def test_compare_handles_small_rasters():
    result = compare(_img(np.zeros((4, 4))), _img(np.full((4, 4), 0.1)))
    assert result.ssim is None
    assert result.psnr_db == pytest.approx(20.0)
