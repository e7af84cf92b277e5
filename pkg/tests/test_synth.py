import numpy as np
import pytest

from stressfactors.synth import (FactorDgpSpec, MfGdpSpec, gen_factor_panel, gen_gar_data, gen_market_panel,
                                 gen_mf_gdp)
from stressfactors.transforms import adf_test


def test_rank_one_zero_noise():
    panel, truth = gen_factor_panel(FactorDgpSpec(m=5, r1=1, r2=0, noise_scale=0.0, T=100, seed=1))
    s = np.linalg.svd(panel.values, compute_uv=False)
    assert s[1] < 1e-10 * s[0]
    assert np.allclose(panel.values, np.outer(truth.factors[:, 0], truth.loadings[:, 0]))


def test_factor_panel_deterministic_and_shaped():
    spec = FactorDgpSpec(T=300, seed=4)
    a, ta = gen_factor_panel(spec)
    b, _ = gen_factor_panel(spec)
    assert np.array_equal(a.values, b.values)
    assert a.values.shape == (300, 9) and ta.factors.shape == (300, 3)
    assert np.allclose(ta.loadings.T @ ta.loadings, np.eye(3))
    assert ta.stationary.tolist() == [False, False, True]
    c, _ = gen_factor_panel(FactorDgpSpec(T=300, seed=5))
    assert not np.array_equal(a.values, c.values)


def test_integrated_factors_look_integrated():
    keep = 0
    for s in range(30):
        _, truth = gen_factor_panel(FactorDgpSpec(m=3, r1=1, r2=0, T=1000, seed=s))
        keep += adf_test(truth.factors[:, 0]).p_value > 0.05
    assert keep >= 27


@pytest.mark.parametrize("kw", [dict(r1=5, r2=4), dict(r1=0, r2=0), dict(ar_coefs=(1.0,)), dict(d=(1, 0))])
def test_invalid_factor_spec(kw):
    with pytest.raises(ValueError):
        gen_factor_panel(FactorDgpSpec(**kw))


def test_mf_gdp_layout_and_determinism():
    q, m, truth = gen_mf_gdp(60, seed=2)
    q2, m2, _ = gen_mf_gdp(60, seed=2)
    assert np.array_equal(q.values, q2.values) and np.array_equal(m.values, m2.values)
    assert q.T == 20 and m.T == 60 and truth.monthly_growth.shape == (60,)
    assert q.names == ("GDP_P", "GDP_E") and m.names[-1] == "U"
    assert all(str(d).endswith(("-03-31", "-06-30", "-09-30", "-12-31")) for d in q.dates)


def test_mf_gdp_zero_noise_identical():
    q, _, truth = gen_mf_gdp(60, MfGdpSpec(xi_P=1.0, xi_E=1.0), seed=3)
    assert np.allclose(q.values[:, 0], q.values[:, 1])
    assert np.allclose(q.values[:, 0], truth.monthly_growth.reshape(-1, 3).sum(axis=1))


def test_mf_gdp_xi_recovered():
    q, _, truth = gen_mf_gdp(1200, seed=4)
    agg = truth.monthly_growth.reshape(-1, 3).sum(axis=1)
    assert abs(agg.var(ddof=1) / q.values[:, 0].var(ddof=1) - 0.7) < 0.1


@pytest.mark.parametrize("months, kw", [(61, {}), (60, dict(spec=MfGdpSpec(xi_P=0.0))),
                                        (60, dict(spec=MfGdpSpec(xi_E=-1.0))), (60, dict(start="2000-02"))])
def test_mf_gdp_errors(months, kw):
    with pytest.raises(ValueError):
        gen_mf_gdp(months, **kw)


def test_gar_true_quantile():
    y, x, tq = gen_gar_data(3000, seed=5)
    t = np.arange(1, 3000)
    for tau in (0.1, 0.5, 0.9):
        assert abs(np.mean(y[t] < tq(t, tau)) - tau) < 0.03


def test_market_panel():
    panel, s = gen_market_panel(500, seed=6)
    assert panel.m == 7 and panel.T == 500 and np.all(panel.values[:, :3] > 0)
    b, _ = gen_market_panel(500, seed=6)
    assert np.array_equal(panel.values, b.values)
