import numpy as np
import pytest

from stressfactors.statespace import BayesPriors, ffbs_sample
from stressfactors.synth import FactorDgpSpec, gen_factor_panel


@pytest.fixture(scope="module")
def draws():
    panel, truth = gen_factor_panel(FactorDgpSpec(m=6, r1=1, r2=0, T=200, seed=1))
    return panel, truth, ffbs_sample(panel, 1, n_draws=300, burn_in=100, seed=5)


def test_seed_required():
    with pytest.raises(ValueError, match="seed"):
        ffbs_sample(np.zeros((20, 3)), 1)


def test_same_seed_same_draws():
    panel, _ = gen_factor_panel(FactorDgpSpec(m=4, r1=1, r2=0, T=60, seed=2))
    a = ffbs_sample(panel, 1, n_draws=20, burn_in=5, seed=9)
    b = ffbs_sample(panel, 1, n_draws=20, burn_in=5, seed=9)
    assert np.array_equal(a.factors, b.factors) and np.array_equal(a.loadings, b.loadings)


def test_draws_identified(draws):
    _, _, d = draws
    assert np.allclose(np.einsum("nmr,nms->nrs", d.loadings, d.loadings), 1.0, atol=1e-8)
    assert np.all(d.loadings[np.arange(len(d.loadings)), np.argmax(np.abs(d.loadings[:, :, 0]), axis=1), 0] > 0)
    assert np.all(d.sigma_eps > 0) and np.all(d.Q > 0)


def test_posterior_tracks_truth(draws):
    panel, truth, d = draws
    # the true factor is identified up to scale and offset; compare in loading-projected units
    proj = truth.factors @ truth.loadings.T @ d.loadings.mean(axis=0)
    mean, sd = d.factor_mean[:, 0], d.factor_sd[:, 0]
    shift = np.median(proj[:, 0] - mean)
    inside = np.abs(proj[:, 0] - shift - mean) <= 2 * np.sqrt(sd**2 + 0.05)
    assert inside.mean() >= 0.9
    f = d.factor_mean[:, 0]
    assert np.corrcoef(f[1:], f[:-1])[0, 1] > 0.95


def test_zero_noise_collapses():
    # near-zero noise: draws concentrate on the projection of the data
    rng = np.random.default_rng(3)
    w = np.cumsum(rng.standard_normal(80))
    x = np.outer(w, [0.5, 0.5, 0.5, 0.5]) + 1e-4 * rng.standard_normal((80, 4))
    d = ffbs_sample(x, 1, n_draws=50, burn_in=50, seed=4,
                    priors=BayesPriors(sigma_shape=1000.0, sigma_scale=1e-5))
    assert np.max(d.factor_sd) ** 2 < 1e-4
    proj = x @ d.loadings[-1]
    assert np.max(np.abs(d.factors[-1] - proj)) < 1e-2
