import warnings

import numpy as np
import pytest

from stressfactors.nsfactor import principal_angle_deg
from stressfactors.statespace import (align_factors, combine_factors, em_estimate, explained_variance,
                                      kalman_smoother)
from stressfactors.statespace.em import EMError, identify
from stressfactors.synth import FactorDgpSpec, gen_factor_panel


@pytest.fixture(scope="module")
def fitted():
    panel, truth = gen_factor_panel(FactorDgpSpec(T=1000, seed=0))
    return panel, truth, em_estimate(panel, 3)


def test_loadings_recover_truth(fitted):
    panel, truth, est = fitted
    assert est.converged
    assert principal_angle_deg(est.loadings, truth.loadings) < 15


def test_identification(fitted):
    _, _, est = fitted
    L = est.loadings
    assert np.allclose(L.T @ L, np.eye(3), atol=1e-8)
    assert np.all(L[np.argmax(np.abs(L), axis=0), np.arange(3)] > 0)


def test_trace_nondecreasing(fitted):
    assert np.all(np.diff(fitted[2].loglik_trace) >= -1e-8)


def test_stationarity_flags(fitted):
    _, _, est = fitted
    # two random walks and one AR(1) in the truth
    assert est.stationary.sum() == 1


@pytest.mark.parametrize("seed", range(20))
def test_monotone_small_panels(seed):
    panel, _ = gen_factor_panel(FactorDgpSpec(m=6, r1=1, r2=1, T=150, seed=seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        est = em_estimate(panel, 2, max_iter=500)
    assert np.all(np.diff(est.loglik_trace) >= -1e-8)


def test_identify_leaves_common_component():
    panel, _ = gen_factor_panel(FactorDgpSpec(m=5, r1=1, r2=1, T=100, seed=3))
    est = em_estimate(panel, 2, max_iter=5)
    model = est.model
    A = np.array([[2.0, 0.3], [-0.5, 1.5]])
    skew = model.transform(A)
    back = identify(skew)
    c1 = kalman_smoother(skew, panel).a_smooth[:, :2] @ skew.loadings.T
    c2 = kalman_smoother(back, panel).a_smooth[:, :2] @ back.loadings.T
    assert np.max(np.abs(c1 - c2)) < 1e-8
    assert np.allclose(back.loadings.T @ back.loadings, np.eye(2), atol=1e-8)


def test_single_random_walk_factor():
    rng = np.random.default_rng(4)
    w = np.cumsum(rng.standard_normal(400))
    x = np.outer(w, rng.uniform(0.5, 1.5, 6)) + rng.standard_normal((400, 6))
    est = em_estimate(x, 1)
    assert abs(np.corrcoef(est.factors[:, 0], w)[0, 1]) > 0.99


def test_max_iter_warns():
    panel, _ = gen_factor_panel(FactorDgpSpec(m=5, r1=1, r2=1, T=100, seed=5))
    with pytest.warns(RuntimeWarning, match="did not converge"):
        est = em_estimate(panel, 2, max_iter=2)
    assert est.status == "max_iter" and len(est.loglik_trace) == 3


def test_bad_r():
    with pytest.raises(ValueError):
        em_estimate(np.random.default_rng(0).standard_normal((50, 3)), 3)


def test_explained_variance_saturated():
    rng = np.random.default_rng(6)
    f = np.cumsum(rng.standard_normal(300))[:, None]
    L = np.array([[0.6], [0.8]])
    ev = explained_variance((f, L), f @ L.T)
    assert abs(ev.share[0] - 1.0) < 1e-12


def test_explained_variance_ordered(fitted, tmp_path):
    panel, _, est = fitted
    ev = explained_variance(est, panel)
    assert np.all(np.diff(ev.share) <= 0) and np.all(np.diff(ev.cumulative) >= 0)
    assert ev.cumulative[-1] <= 1 + 1e-12
    lines = ev.to_csv(tmp_path / "ev.csv").read_text().splitlines()
    assert lines[0] == "r,explained_variance,cumulative" and len(lines) == 4


def test_combine_factors():
    rng = np.random.default_rng(7)
    z = rng.standard_normal(50)
    assert np.array_equal(combine_factors(np.column_stack([z, z])), z)
    F = rng.standard_normal((40, 5))
    assert np.max(np.abs(combine_factors(F) - np.array([sum(row) / 5 for row in F]))) < 1e-12
    with pytest.raises(ValueError):
        combine_factors(np.zeros((5, 0)))


def test_alignment_flips_sign():
    rng = np.random.default_rng(8)
    z = np.cumsum(rng.standard_normal(200))
    panel = np.column_stack([z + 0.1 * rng.standard_normal(200) for _ in range(4)])
    aligned = align_factors(np.column_stack([z, -z]), panel)
    assert np.allclose(aligned[:, 0], aligned[:, 1])
    assert np.allclose(combine_factors(aligned), (z - z.mean()) / z.std(ddof=1))
