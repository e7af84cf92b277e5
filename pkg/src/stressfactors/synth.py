"""Seeded synthetic data-generating processes with known ground truth.

Every generator draws from ``numpy.random.Generator(PCG64(seed))`` and is a
pure function of its spec and seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .panel import TimeSeriesPanel

RNG_ALGORITHM = "PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def daily_dates(T: int, start: str = "2005-01-01") -> np.ndarray:
    return np.datetime64(start, "D") + np.arange(T)


def month_end_dates(T: int, start: str = "2000-01") -> np.ndarray:
    months = np.datetime64(start, "M") + np.arange(T)
    return (months + 1).astype("datetime64[D]") - 1


@dataclass(frozen=True)
class FactorDgpSpec:
    """Panel ``X = L f + e`` with ``r1`` integrated and ``r2`` AR(1) factors.

    ``d`` gives the integration order of each integrated factor (an int
    applies to all).  Loadings are a random orthonormal ``m x (r1+r2)``
    matrix; noise variances are ``noise_scale**2`` times U(0.5, 1.5) draws.
    """

    m: int = 9
    r1: int = 2
    r2: int = 1
    d: int | tuple = 1
    T: int = 1000
    seed: int = 0
    noise_scale: float = 0.5
    ar_coefs: tuple = (0.8,)
    factor_scale: float = 1.0
    drift: float = 0.0
    frequency: str = "daily"

    def orders(self) -> list[int]:
        return [self.d] * self.r1 if isinstance(self.d, int) else list(self.d)

    def validate(self) -> None:
        if self.r1 < 0 or self.r2 < 0 or self.r1 + self.r2 >= self.m:
            raise ValueError(f"need r1 + r2 < m, got r1={self.r1}, r2={self.r2}, m={self.m}")
        if self.r1 + self.r2 == 0:
            raise ValueError("need at least one factor")
        if len(self.orders()) != self.r1 or any(o < 1 for o in self.orders()):
            raise ValueError("d must give one integration order >= 1 per integrated factor")
        coefs = self.ar(self.r2)
        if np.any(np.abs(coefs) >= 1):
            raise ValueError("stationary AR coefficients must lie inside the unit circle")
        if self.T < 3 or self.noise_scale < 0:
            raise ValueError("need T >= 3 and noise_scale >= 0")

    def ar(self, r2: int) -> np.ndarray:
        c = np.asarray(self.ar_coefs, dtype=float).ravel()
        if c.size == 1:
            c = np.repeat(c, r2)
        if c.size != r2:
            raise ValueError(f"need {r2} AR coefficients, got {c.size}")
        return c


@dataclass(frozen=True)
class DgpTruth:
    loadings: np.ndarray | None = None
    factors: np.ndarray | None = None
    stationary: np.ndarray | None = None
    noise_var: np.ndarray | None = None
    monthly_growth: np.ndarray | None = None
    params: dict = field(default_factory=dict)


def gen_factor_panel(spec: FactorDgpSpec) -> tuple[TimeSeriesPanel, DgpTruth]:
    spec.validate()
    rng = make_rng(spec.seed)
    T, m, r1, r2 = spec.T, spec.m, spec.r1, spec.r2
    r = r1 + r2
    L, _ = np.linalg.qr(rng.standard_normal((m, r)))
    idx = np.argmax(np.abs(L), axis=0)
    L = L * np.sign(L[idx, np.arange(r)])
    f = np.empty((T, r))
    for j, order in enumerate(spec.orders()):
        path = spec.drift + spec.factor_scale * rng.standard_normal(T)
        for _ in range(order):
            path = np.cumsum(path)
        f[:, j] = path
    for j, phi in enumerate(spec.ar(r2)):
        u = spec.factor_scale * rng.standard_normal(T)
        path = np.empty(T)
        path[0] = u[0] / np.sqrt(1 - phi**2)
        for t in range(1, T):
            path[t] = phi * path[t - 1] + u[t]
        f[:, r1 + j] = path
    noise_var = spec.noise_scale**2 * rng.uniform(0.5, 1.5, size=m)
    X = f @ L.T + rng.standard_normal((T, m)) * np.sqrt(noise_var)
    dates = daily_dates(T) if spec.frequency == "daily" else month_end_dates(T)
    panel = TimeSeriesPanel(dates, [f"x{i + 1}" for i in range(m)], X, spec.frequency)
    truth = DgpTruth(L, f, np.r_[np.zeros(r1, bool), np.ones(r2, bool)], noise_var)
    return panel, truth


@dataclass(frozen=True)
class MfGdpSpec:
    """Latent monthly growth ``g_t = rho g_{t-1} + beta' x_t + e_t`` observed quarterly twice.

    The quarterly measures are the 3-month sum of ``g`` plus independent
    noise whose variance makes ``var(agg g) / var(measure) = xi``.
    Indicators ``x`` are independent AR(1) processes; unemployment growth
    loads on ``g``.
    """

    rho: float = 0.5
    sigma_g: float = 0.5
    beta: tuple = (0.6, -0.4, 0.3)
    indicator_ar: float = 0.5
    xi_P: float = 0.7
    xi_E: float = 0.5
    unemp_loading: float = -0.5
    unemp_sd: float = 0.5
    intercept: float = 0.2


def gen_mf_gdp(months: int, spec: MfGdpSpec = MfGdpSpec(), seed: int = 0, start: str = "2000-01"):
    """Simulate (quarterly panel, monthly panel, truth) for the reconciliation model.

    The quarterly panel holds ``GDP_P`` and ``GDP_E`` at quarter-end months;
    the monthly panel holds the indicators ``x1..xk`` and ``U``.
    """
    if months % 3 != 0 or months < 6:
        raise ValueError("months must be a positive multiple of 3 (>= 6)")
    for name in ("xi_P", "xi_E"):
        xi = getattr(spec, name)
        if not 0.0 < xi <= 1.0:
            # independent measurement noise cannot make a measure less variable than the truth
            raise ValueError(f"{name} must lie in (0, 1], got {xi}")
    if abs(spec.rho) >= 1:
        raise ValueError("|rho| must be < 1")
    rng = make_rng(seed)
    beta = np.asarray(spec.beta, dtype=float)
    k = beta.size
    burn = 50
    n = months + burn
    x = np.zeros((n, k))
    e = rng.standard_normal((n, k))
    for t in range(1, n):
        x[t] = spec.indicator_ar * x[t - 1] + e[t]
    g = np.zeros(n)
    eps = spec.sigma_g * rng.standard_normal(n)
    for t in range(1, n):
        g[t] = spec.intercept + spec.rho * g[t - 1] + x[t] @ beta + eps[t]
    x, g = x[burn:], g[burn:]
    agg = g.reshape(-1, 3).sum(axis=1)
    V = agg.var(ddof=1)
    out = {}
    noise = {}
    for name, xi in (("GDP_P", spec.xi_P), ("GDP_E", spec.xi_E)):
        var = V * (1.0 / xi - 1.0)
        noise[name] = var
        out[name] = agg + np.sqrt(var) * rng.standard_normal(agg.size)
    u = spec.unemp_loading * g + spec.unemp_sd * rng.standard_normal(months)
    if int(start[5:7]) % 3 != 1:
        raise ValueError(f"start must be the first month of a quarter, got {start}")
    mdates = month_end_dates(months, start)
    qdates = mdates[2::3]
    quarterly = TimeSeriesPanel(qdates, ["GDP_P", "GDP_E"], np.column_stack([out["GDP_P"], out["GDP_E"]]), "quarterly")
    monthly = TimeSeriesPanel(mdates, [f"x{i + 1}" for i in range(k)] + ["U"], np.column_stack([x, u]), "monthly")
    truth = DgpTruth(monthly_growth=g, params=dict(noise_var=noise, agg_var=V, rho=spec.rho, beta=beta))
    return quarterly, monthly, truth


@dataclass(frozen=True)
class GarDgpSpec:
    """Location-scale growth process driven by a nonnegative risk index.

    ``y_{t+1} = a + b y_t + c x_t + (s0 + s1 x_t) e_{t+1}`` with
    ``x_t = |z_t|``, ``z`` an AR(1) with coefficient ``risk_ar``.  Conditional
    quantiles are linear in ``(1, y_t, x_t)``.
    """

    a: float = 0.5
    b: float = 0.3
    c: float = -0.8
    s0: float = 0.3
    s1: float = 1.2
    risk_ar: float = 0.9


def gen_gar_data(T: int, spec: GarDgpSpec = GarDgpSpec(), seed: int = 0):
    """Return ``(y, x, true_quantile)`` where ``true_quantile(t, tau)`` gives the
    conditional tau-quantile of ``y[t]`` given information at ``t - 1``."""
    rng = make_rng(seed)
    z = np.zeros(T)
    for t in range(1, T):
        z[t] = spec.risk_ar * z[t - 1] + np.sqrt(1 - spec.risk_ar**2) * rng.standard_normal()
    x = np.abs(z)
    y = np.zeros(T)
    e = rng.standard_normal(T)
    for t in range(1, T):
        y[t] = spec.a + spec.b * y[t - 1] + spec.c * x[t - 1] + (spec.s0 + spec.s1 * x[t - 1]) * e[t]

    def true_quantile(t, tau):
        t = np.asarray(t)
        return (spec.a + spec.b * y[t - 1] + spec.c * x[t - 1]
                + (spec.s0 + spec.s1 * x[t - 1]) * norm.ppf(tau))

    return y, x, true_quantile


MARKET_COLUMNS = ("eq_large", "eq_mid", "fx", "govt_5y", "govt_10y", "corp_3_5y", "corp_10y_plus")


def gen_market_panel(T: int, seed: int = 0, start: str = "2005-01-01"):
    """Raw daily prices and yields driven by one integrated stress process.

    Equity and FX volatility scale with ``1 + |s_t|`` and corporate spreads
    load on ``s_t``, a Gaussian random walk.  Returns ``(panel, s)``.
    """
    rng = make_rng(seed)
    s = np.cumsum(0.05 * rng.standard_normal(T))
    vol = 1.0 + np.abs(s)
    e = rng.standard_normal((T, 3))
    eq_large = 100.0 * np.exp(np.cumsum(0.0002 + 0.008 * vol * e[:, 0]))
    eq_mid = 80.0 * np.exp(np.cumsum(0.0002 + 0.006 * vol * (0.6 * e[:, 0] + 0.8 * e[:, 1])))
    fx = 1.5 * np.exp(np.cumsum(0.004 * vol * e[:, 2]))
    g5 = 3.0 + np.cumsum(0.02 * rng.standard_normal(T))
    g10 = g5 + 0.5 + np.cumsum(0.01 * rng.standard_normal(T))
    c5 = g5 + 1.0 + 0.3 * s + 0.05 * rng.standard_normal(T)
    c10 = g10 + 1.2 + 0.4 * s + 0.05 * rng.standard_normal(T)
    X = np.column_stack([eq_large, eq_mid, fx, g5, g10, c5, c10])
    return TimeSeriesPanel(daily_dates(T, start), MARKET_COLUMNS, X, "daily"), s


def random_orthonormal(m: int, r: int, rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((m, r)))
    return q


def stack_panels(panels: Sequence[TimeSeriesPanel]) -> TimeSeriesPanel:
    base = panels[0]
    names = [n for p in panels for n in p.names]
    return TimeSeriesPanel(base.dates, names, np.column_stack([p.values for p in panels]), base.frequency)
