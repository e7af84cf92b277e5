import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from stressfactors.gar import (DEFAULT_TAUS, DensityForecast, QuantileFit, ScoringError, ks_uniformity, pinball, pit,
                               quantile_ic, quantile_score, qwcrps, weight_function)


def test_quantile_score_examples():
    assert abs(quantile_score(1.0, 0.0, 0.9) - 1.8) < 1e-15
    assert quantile_score(0.4, 0.4, 0.3) == 0
    assert abs(quantile_score(0.0, 1.0, 0.9) - 0.2) < 1e-15


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0.01, 0.99))
def test_quantile_score_nonnegative_and_twice_pinball(y, q, tau):
    qs = quantile_score(y, q, tau)
    assert qs >= 0
    assert abs(qs - 2 * pinball(y - q, tau)) <= 1e-9 * (1 + abs(y - q))


def test_single_point_grid():
    fc = DensityForecast([0.5], [1.0])
    assert qwcrps(fc, 3.0) == quantile_score(3.0, 1.0, 0.5)
    assert qwcrps(fc, 3.0, dtau=0.05) == pytest.approx(0.05 * quantile_score(3.0, 1.0, 0.5), abs=1e-15)


def test_perfect_degenerate_forecast():
    fc = DensityForecast(DEFAULT_TAUS, np.full(19, 2.5))
    for w in ("uniform", "centre", "left"):
        assert qwcrps(fc, 2.5, w) == 0


def test_unsorted_grid_rejected():
    with pytest.raises(ScoringError):
        DensityForecast([0.5, 0.2], [0.0, 1.0])
    with pytest.raises(ScoringError):
        weight_function([0.5], "middle")


@pytest.mark.parametrize("weight", ["uniform", "centre", "left"])
@pytest.mark.parametrize("y", [-1.3, 0.2, 2.1])
def test_fine_grid_matches_quadrature(weight, y):
    taus = np.linspace(1e-4, 1 - 1e-4, 9999)
    fc = DensityForecast(taus, norm.ppf(taus))
    f = lambda t: float(weight_function(t, weight) * quantile_score(y, norm.ppf(t), t))
    ref = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in [(0, norm.cdf(y)), (norm.cdf(y), 1)])
    assert abs(qwcrps(fc, y, weight) - ref) < 1e-4


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=19, max_size=19), st.floats(-10, 10), st.floats(-50, 50))
def test_uniform_weight_translation_invariance(qs, y, c):
    fc = DensityForecast(DEFAULT_TAUS, qs)
    shifted = DensityForecast(DEFAULT_TAUS, np.array(qs) + c)
    a, b = qwcrps(fc, y), qwcrps(shifted, y + c)
    assert abs(a - b) <= 1e-9 * (1 + abs(a))
    assert abs(a - 0.05 * quantile_score(y, fc.quantiles, DEFAULT_TAUS).sum()) <= 1e-9 * (1 + abs(a))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=19, max_size=19), st.floats(-12, 12))
def test_rearrangement_never_raises_grid_loss(qs, y):
    raw = np.array(qs)
    before = pinball(y - raw, DEFAULT_TAUS).sum()
    after = pinball(y - DensityForecast(DEFAULT_TAUS, raw).quantiles, DEFAULT_TAUS).sum()
    assert after <= before + 1e-9


def _fits(p, n, loss, k=19):
    return [QuantileFit(t, np.zeros(p), loss * n, n, p) for t in DEFAULT_TAUS[:k]]


def test_information_criteria_examples():
    aic, bic = quantile_ic(_fits(2, 100, 1.0))
    assert abs(aic - 4.0) < 1e-12 and abs(bic - 2 * math.log(100)) < 1e-12
    assert abs(bic - 9.210) < 1e-3
    assert abs(quantile_ic(_fits(4, 100, 0.7))[0] - quantile_ic(_fits(2, 100, 0.7))[0] - 4) < 1e-12
    assert quantile_ic(_fits(2, 100, 0.8))[0] > quantile_ic(_fits(2, 100, 0.7))[0]
    with pytest.raises(ScoringError, match="zero"):
        quantile_ic(_fits(2, 100, 0.0))
    with pytest.raises(ScoringError):
        quantile_ic(_fits(2, 100, 1.0) + _fits(3, 100, 1.0))


def test_pit_examples():
    fc = DensityForecast(DEFAULT_TAUS, DEFAULT_TAUS)
    assert abs(pit(fc, 0.3) - 0.3) < 1e-12
    assert pit(fc, -5.0) < 0.05 and pit(fc, 5.0) > 0.95
    assert 0 <= pit(fc, -1e9) <= pit(fc, -1.0) < 0.05


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=19, max_size=19), st.floats(-20, 20), st.floats(-20, 20))
def test_pit_monotone_in_y(qs, a, b):
    fc = DensityForecast(DEFAULT_TAUS, qs)
    lo, hi = sorted((a, b))
    assert 0 <= pit(fc, lo) <= pit(fc, hi) <= 1


def test_pit_gaussian_calibration():
    taus = DEFAULT_TAUS
    passes = 0
    for s in range(100):
        y = np.random.default_rng(s).standard_normal(150)
        fc = DensityForecast(taus, norm.ppf(taus))
        passes += ks_uniformity([pit(fc, v) for v in y]).passed
    assert passes >= 90


def test_ks_band():
    v = ks_uniformity(np.linspace(0.005, 0.995, 100))
    assert abs(v.band - 0.136) < 1e-12 and v.passed
    assert not ks_uniformity(np.full(100, 0.01)).passed
