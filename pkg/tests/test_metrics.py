import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fpqe.metrics import (
    batch_report,
    gaussian_window,
    mse_metric,
    paired_report,
    psnr_from_mse,
    psnr_metric,
    ssim_metric,
)

from _oracles import ssim_naive

images = arrays(np.float64, (14, 14), elements=st.floats(0, 1))


@pytest.mark.parametrize("shape", [(28, 28), (16, 20), (11, 11)])
def test_ssim_matches_windowed_loops(rng, shape):
    x = rng.uniform(size=shape)
    y = np.clip(x + rng.normal(scale=0.1, size=shape), 0, 1)
    assert abs(ssim_metric(x, y) - ssim_naive(x, y)) < 1e-8


def test_ssim_small_images_shrink_window(rng):
    x, y = rng.uniform(size=(2, 8, 8))
    assert abs(ssim_metric(x, y) - ssim_naive(x, y, win=7)) < 1e-8


def test_ssim_colour_averages_channels(rng):
    x, y = rng.uniform(size=(2, 3, 16, 16))
    want = np.mean([ssim_naive(a, b) for a, b in zip(x, y)])
    assert abs(ssim_metric(x, y) - want) < 1e-8


@settings(max_examples=30, deadline=None)
@given(images)
def test_ssim_of_identical_images_is_one(x):
    assert math.isclose(ssim_metric(x, x), 1.0, abs_tol=1e-12)


@settings(max_examples=30, deadline=None)
@given(images, images)
def test_ssim_symmetric_and_bounded(x, y):
    s = ssim_metric(x, y)
    assert math.isclose(s, ssim_metric(y, x), abs_tol=1e-12)
    assert -1 - 1e-12 <= s <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(images, images)
def test_mse_and_psnr_agree(x, y):
    m = mse_metric(x, y)
    assert math.isclose(m, float(((x - y) ** 2).sum()) / x.size, rel_tol=1e-12, abs_tol=1e-15)
    p = psnr_metric(x, y)
    assert p == math.inf if m == 0 else math.isclose(p, -10 * math.log10(m), rel_tol=1e-12)


def test_psnr_reference_points():
    assert math.isclose(psnr_from_mse(0.01), 20.0)
    assert math.isclose(psnr_from_mse(1e-4), 40.0)
    assert psnr_from_mse(0.0) == math.inf


def test_gaussian_window_normalised():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert math.isclose(w.sum(), 1.0)
    assert np.allclose(w, w.T)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape"):
        mse_metric(np.zeros((2, 2)), np.zeros((3, 3)))


def test_report_skips_infinite_psnr(rng):
    xs = list(rng.uniform(size=(3, 12, 12)))
    recs = [xs[0].copy(), np.clip(xs[1] + 0.1, 0, 1), np.clip(xs[2] - 0.1, 0, 1)]
    rep = paired_report(xs, recs)
    assert rep.excluded_inf == 1
    assert rep.n_images == 3
    assert math.isclose(rep.psnr, np.mean([psnr_metric(x, r) for x, r in zip(xs[1:], recs[1:])]))
    assert math.isclose(rep.mse, np.mean([mse_metric(x, r) for x, r in zip(xs, recs)]))


def test_report_mean_mse_mode(rng):
    xs = list(rng.uniform(size=(4, 12, 12)))
    recs = [np.clip(x + rng.normal(scale=0.05, size=x.shape), 0, 1) for x in xs]
    rep = paired_report(xs, recs, psnr_mode="mean-mse")
    assert math.isclose(rep.psnr, psnr_from_mse(rep.mse))
    assert rep.aggregation == "mean-mse"


def test_identity_report(rng):
    rep = batch_report(rng.uniform(size=(3, 12, 12)), lambda x: x)
    assert rep.mse == 0 and rep.ssim == 1.0
    assert rep.psnr == math.inf and rep.excluded_inf == 3
    assert list(rep.row()) == ["mse", "psnr_db", "ssim", "n", "excluded_inf_count"]


@pytest.mark.parametrize("bad", [dict(psnr_mode="median"), dict(originals=[])])
def test_report_rejects_bad_input(bad):
    kw = dict(originals=[np.zeros((4, 4))], reconstructions=[np.zeros((4, 4))])
    kw.update(bad)
    if "originals" in bad:
        kw["reconstructions"] = []
    with pytest.raises(ValueError):
        paired_report(**kw)
