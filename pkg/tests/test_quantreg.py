import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pinball_objective, vertex_optimum
from stressfactors.gar import QuantRegError, qr_fit, qr_fit_grid


def test_median_of_three():
    fit = qr_fit(np.array([1.0, 2.0, 3.0]), np.ones((3, 1)), 0.5)
    assert abs(fit.coefficients[0] - 2.0) < 1e-12


def test_lower_quartile_of_five():
    fit = qr_fit(np.arange(1.0, 6.0), np.ones((5, 1)), 0.25)
    assert abs(fit.coefficients[0] - 2.0) < 1e-12


def _problem(rng, n, p, ties=False):
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    y = X @ rng.standard_normal(p) + rng.standard_t(3, n)
    if ties:
        X[:, 1:] = np.round(X[:, 1:])
        y = np.round(y)
    return y, X


@pytest.mark.parametrize("seed", range(30))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(8, 31)), int(rng.integers(1, 4))
    y, X = _problem(rng, n, p, ties=seed % 3 == 0)
    tau = float(rng.uniform(0.05, 0.95))
    best = vertex_optimum(y, X, tau)
    got = qr_fit(y, X, tau).loss
    assert got <= best * (1 + 1e-6) + 1e-12


def test_grid_matches_single_fits():
    rng = np.random.default_rng(40)
    y, X = _problem(rng, 60, 3)
    taus = np.arange(1, 20) * 0.05
    for f, tau in zip(qr_fit_grid(y, X, taus), taus):
        assert abs(f.loss - qr_fit(y, X, tau).loss) <= 1e-9 * max(f.loss, 1)


def test_local_optimality():
    rng = np.random.default_rng(41)
    y, X = _problem(rng, 100, 3)
    fit = qr_fit(y, X, 0.3)
    base = pinball_objective(y, X, fit.coefficients, 0.3)
    for _ in range(1000):
        step = rng.standard_normal(3) * 10 ** rng.uniform(-6, 0)
        assert pinball_objective(y, X, fit.coefficients + step, 0.3) >= base - 1e-10


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.5, 1.5])
def test_bad_tau(tau):
    with pytest.raises(QuantRegError):
        qr_fit(np.arange(10.0), np.ones((10, 1)), tau)


def test_rank_deficient():
    X = np.column_stack([np.ones(10), np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(QuantRegError, match="rank"):
        qr_fit(np.arange(10.0), X, 0.5)


def test_too_few_rows():
    with pytest.raises(QuantRegError):
        qr_fit(np.arange(3.0), np.column_stack([np.ones(3), np.arange(3.0)]), 0.5)


def test_interpolation_fraction():
    # at an optimum, at most n*tau residuals are negative and at most n*(1-tau) positive
    rng = np.random.default_rng(42)
    y, X = _problem(rng, 200, 3)
    for tau in (0.1, 0.5, 0.9):
        r = y - qr_fit(y, X, tau).predict(X)
        assert (r < -1e-9).sum() <= 200 * tau + 1e-9
        assert (r > 1e-9).sum() <= 200 * (1 - tau) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=25), st.floats(0.02, 0.98))
def test_intercept_only_is_sample_quantile(vals, tau):
    y = np.array(vals)
    fit = qr_fit(y, np.ones((y.size, 1)), tau)
    best = min(pinball_objective(y, np.ones((y.size, 1)), np.array([v]), tau) for v in y)
    assert fit.loss <= best * (1 + 1e-9) + 1e-9
