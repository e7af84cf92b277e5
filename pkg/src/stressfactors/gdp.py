"""Monthly GDP growth reconciled from two noisy quarterly measures.

Model, monthly index ``t``::

    g_t      = c + rho g_{t-1} + beta' x_t + e_t,        e_t ~ N(0, s2_G)
    GDP_i,q  = g_{3q} + g_{3q+1} + g_{3q+2} + u_i,q,    u ~ N(0, s2_i),  i in {P, E}
    U_t      = c_U + lam g_t + v_t,                      v_t ~ N(0, s2_U)

Quarterly measures sit on the last month of each quarter.  The variance
ratio ``xi_i = V / (V + s2_i)``, with ``V`` the variance of the latent
quarterly aggregate, is kept inside an interval by rejection.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .panel import PanelError, TimeSeriesPanel
from .synth import make_rng

log = logging.getLogger(__name__)

XI_INTERVAL = (0.35, 1.15)
MEASURES = ("GDP_P", "GDP_E")


class ReconcileError(RuntimeError):
    pass


def xi_ratio(var_gdp: float, var_gdp_i: float) -> float:
    """``var(GDP) / var(GDP_i)``."""
    if var_gdp <= 0 or var_gdp_i <= 0:
        raise ValueError("variances must be positive")
    return float(var_gdp) / float(var_gdp_i)


def in_interval(xi: float, interval=XI_INTERVAL) -> bool:
    return interval[0] < xi < interval[1]


def log_growth(panel: TimeSeriesPanel, names=None, scale: float = 100.0) -> TimeSeriesPanel:
    """``scale * diff(log x)`` for the named columns (all by default); first row dropped.

    Columns not named are kept in levels, aligned to the shortened sample.
    """
    names = list(panel.names) if names is None else list(names)
    V = panel.values.copy()
    out = V[1:].copy()
    for n in names:
        j = panel.names.index(n)
        col = V[:, j]
        if np.any(col[np.isfinite(col)] <= 0):
            raise PanelError(f"column {n!r} has nonpositive values; log growth undefined")
        out[:, j] = scale * np.diff(np.log(col))
    return TimeSeriesPanel(panel.dates[1:], panel.names, out, panel.frequency)


def annualised_growth(panel: TimeSeriesPanel, periods_per_year: int = 4) -> TimeSeriesPanel:
    """Annualised log growth rate in percent, ``100 * periods_per_year * diff(log x)``."""
    return log_growth(panel, scale=100.0 * periods_per_year)


@dataclass(frozen=True)
class MixedFrequencyGdpModel:
    dates: np.ndarray            # monthly dates
    measures: np.ndarray         # (Q, 2) quarterly GDP_P, GDP_E (NaN allowed)
    indicators: np.ndarray       # (T, k)
    unemployment: np.ndarray | None
    indicator_names: tuple = ()
    xi_interval: tuple = XI_INTERVAL
    fixed_noise: dict = field(default_factory=dict)   # measure name -> fixed variance

    @property
    def T(self) -> int:
        return self.indicators.shape[0]

    @property
    def n_quarters(self) -> int:
        return self.measures.shape[0]

    @property
    def quarter_end_rows(self) -> np.ndarray:
        return np.arange(self.n_quarters) * 3 + 2

    def monthly_rows(self) -> np.ndarray:
        """(T, 2) layout with the quarterly measures on quarter-end months, NaN elsewhere."""
        out = np.full((self.T, 2), np.nan)
        out[self.quarter_end_rows] = self.measures
        return out


def build_mf_model(quarterly: TimeSeriesPanel, monthly: TimeSeriesPanel | None = None, *,
                   dates=None, indicators=None, unemployment: str | None = "U",
                   xi_interval=XI_INTERVAL, fixed_noise=None) -> MixedFrequencyGdpModel:
    """Assemble the reconciliation model.

    ``quarterly`` holds ``GDP_P`` and ``GDP_E`` dated at quarter-end months.
    ``monthly`` holds the (already transformed) indicators and, optionally,
    the unemployment series named ``unemployment``; it must start on the
    first month of a quarter and be complete.  Without a monthly panel,
    ``dates`` gives the monthly calendar.
    """
    for m in MEASURES:
        if m not in quarterly.names:
            raise PanelError(f"quarterly panel lacks {m!r}")
    if monthly is not None:
        mdates = monthly.dates
        if not monthly.is_complete():
            raise PanelError("monthly panel has missing values after transformation")
        names = [n for n in monthly.names if n != unemployment] if indicators is None else list(indicators)
        X = monthly.select(names).values if names else np.zeros((monthly.T, 0))
        U = monthly.column(unemployment) if unemployment and unemployment in monthly.names else None
    else:
        if dates is None:
            raise ValueError("need a monthly panel or monthly dates")
        mdates = np.asarray(dates, dtype="datetime64[D]")
        names, X, U = [], np.zeros((mdates.size, 0)), None
    T = mdates.size
    if T % 3:
        raise PanelError(f"monthly sample of {T} months is not a whole number of quarters")
    month_of = lambda d: int(str(np.datetime64(d, "M"))[5:7])  # noqa: E731
    if month_of(mdates[0]) % 3 != 1:
        raise PanelError(f"monthly sample must start in a quarter's first month, starts {mdates[0]}")
    mkeys = mdates.astype("datetime64[M]")
    pos = {k: i for i, k in enumerate(mkeys)}
    Q = T // 3
    meas = np.full((Q, 2), np.nan)
    qv = quarterly.select(list(MEASURES)).values
    for d, row in zip(quarterly.dates.astype("datetime64[M]"), qv):
        i = pos.get(d)
        if i is None:
            continue
        if i % 3 != 2:
            raise PanelError(f"quarterly observation {d} is not on a quarter-end month")
        meas[i // 3] = row
    if not np.isfinite(meas).any():
        raise PanelError("no quarterly observation falls inside the monthly sample")
    fixed = dict(fixed_noise or {})
    for k, v in fixed.items():
        if k not in MEASURES or v < 0:
            raise ValueError(f"bad fixed noise entry {k}={v}")
    return MixedFrequencyGdpModel(mdates, meas, X, U, tuple(names), tuple(xi_interval), fixed)


@dataclass(frozen=True)
class GdpPriors:
    """Weakly informative priors; variance scales are relative to the data.

    Regression coefficients ~ N(0, coef_var); each variance ~ IG(shape,
    scale_frac * reference variance) with reference the sample variance of
    the corresponding observed series (monthly-scaled for ``s2_G``).
    """

    coef_var: float = 10.0
    shape: float = 2.0
    scale_frac: float = 0.1


@dataclass
class MonthlyGdpPosterior:
    dates: np.ndarray
    mean: np.ndarray
    median: np.ndarray
    q05: np.ndarray
    q95: np.ndarray
    sd: np.ndarray
    n_draws: int
    chains: int
    acceptance: dict          # constraint -> accepted / proposed
    rejections: dict
    xi_draws: np.ndarray      # (n_draws, 2)
    params: dict              # name -> (n_draws, ...) draws
    chain_means: np.ndarray   # (chains, T)
    draws: np.ndarray | None = None

    @property
    def chain_agreement(self) -> float:
        """Largest deviation of a chain mean from the pooled mean, in posterior SDs."""
        sd = np.where(self.sd > 0, self.sd, np.inf)
        return float(np.max(np.abs(self.chain_means - self.mean) / sd))

    def to_panel(self, name: str = "GDP") -> TimeSeriesPanel:
        return TimeSeriesPanel(self.dates, [name], self.mean[:, None], "monthly")

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "mean", "median", "q05", "q95"])
            for row in zip(self.dates, self.mean, self.median, self.q05, self.q95):
                w.writerow([str(row[0])] + [format(v, ".12g") for v in row[1:]])
        return path


# -- latent path -------------------------------------------------------------

def _path_precision(model, state, noise):
    """Banded (upper, bandwidth 2) precision and linear term of ``g | rest``."""
    T = model.T
    rho, c, beta, s2g = state["rho"], state["c"], state["beta"], state["s2_G"]
    mu = c + model.indicators @ beta
    ab = np.zeros((3, T))
    b = np.zeros(T)
    # g_0 ~ N(mu_0 / (1 - rho), s2_G / (1 - rho^2))
    v0 = s2g / (1.0 - rho * rho)
    ab[2, 0] += 1.0 / v0
    b[0] += mu[0] / (1.0 - rho) / v0
    ab[2, 1:] += 1.0 / s2g
    ab[2, :-1] += rho * rho / s2g
    ab[1, 1:] += -rho / s2g
    b[1:] += mu[1:] / s2g
    b[:-1] -= rho * mu[1:] / s2g
    if model.unemployment is not None:
        lam, cu, s2u = state["lam"], state["c_U"], state["s2_U"]
        ab[2] += lam * lam / s2u
        b += lam * (model.unemployment - cu) / s2u
    for j, name in enumerate(MEASURES):
        s2 = noise[name]
        if s2 == 0:
            continue
        obs = np.isfinite(model.measures[:, j])
        w = np.where(obs, 1.0 / s2, 0.0)
        yq = np.where(obs, model.measures[:, j], 0.0) / s2
        ab[2] += np.repeat(w, 3)
        ab[1].reshape(-1, 3)[:, 1:] += w[:, None]
        ab[0].reshape(-1, 3)[:, 2] += w
        b += np.repeat(yq, 3)
    return ab, b


def _aggregation(model, j):
    obs = np.flatnonzero(np.isfinite(model.measures[:, j]))
    A = np.zeros((obs.size, model.T))
    for r, q in enumerate(obs):
        A[r, 3 * q : 3 * q + 3] = 1.0
    return A, model.measures[obs, j]


def draw_path(model, state, noise, rng, mean_only: bool = False) -> np.ndarray:
    """One draw of the monthly path (or its conditional mean).

    Measures with zero noise enter as exact linear constraints via a
    conditioning (kriging) step on the unconstrained draw.
    """
    ab, b = _path_precision(model, state, noise)
    try:
        cb = linalg.cholesky_banded(ab, lower=False)
    except linalg.LinAlgError:
        raise ReconcileError("latent-path precision is not positive definite") from None
    g = linalg.cho_solve_banded((cb, False), b)
    if not mean_only:
        g = g + linalg.solve_banded((0, 2), cb, rng.standard_normal(model.T))
    exact = [j for j, name in enumerate(MEASURES) if noise[name] == 0]
    if exact:
        parts = [_aggregation(model, j) for j in exact]
        A = np.vstack([p[0] for p in parts])
        y = np.concatenate([p[1] for p in parts])
        SA = linalg.cho_solve_banded((cb, False), A.T)
        S = A @ SA
        g = g - SA @ np.linalg.lstsq(S, A @ g - y, rcond=None)[0]
    return g


# -- parameter blocks --------------------------------------------------------

def _draw_regression(rng, Z, y, s2, prior_var):
    prec = Z.T @ Z / s2 + np.eye(Z.shape[1]) / prior_var
    C = np.linalg.cholesky(prec)
    mean = linalg.cho_solve((C, True), Z.T @ y / s2)
    return mean + linalg.solve_triangular(C.T, rng.standard_normal(Z.shape[1]), lower=False)


def _draw_ig(rng, shape, scale):
    return scale / rng.gamma(shape)


def _quarterly_sum(g):
    return g.reshape(-1, 3).sum(axis=1)


def _refs(model):
    meas = model.measures
    ref_q = np.nanvar(meas, ddof=1, axis=0)
    ref_q = np.where(np.isfinite(ref_q) & (ref_q > 0), ref_q, 1.0)
    ref_g = max(float(np.nanmean(ref_q)) / 3.0, 1e-8)
    ref_u = float(np.var(model.unemployment, ddof=1)) if model.unemployment is not None else 1.0
    return ref_q, ref_g, max(ref_u, 1e-8)


def _initial_state(model):
    meas = model.measures
    q = np.nanmean(meas, axis=1)
    q = np.where(np.isfinite(q), q, np.nanmean(q))
    g = np.repeat(q / 3.0, 3)
    ref_q, ref_g, ref_u = _refs(model)
    state = dict(rho=0.0, c=float(np.mean(g)), beta=np.zeros(model.indicators.shape[1]), s2_G=ref_g)
    if model.unemployment is not None:
        state.update(lam=0.0, c_U=float(np.mean(model.unemployment)), s2_U=ref_u)
    noise = {name: model.fixed_noise.get(name, 0.5 * ref_q[j]) for j, name in enumerate(MEASURES)}
    return g, state, noise


def _run_chain(model, n_draws, burn_in, thin, rng, priors, max_tries):
    T = model.T
    X = model.indicators
    k = X.shape[1]
    lo, hi = model.xi_interval
    ref_q, ref_g, ref_u = _refs(model)
    g, state, noise = _initial_state(model)
    stats = dict(rho=[0, 0], GDP_P=[0, 0], GDP_E=[0, 0])   # [proposed, accepted]
    out_g = np.empty((n_draws, T))
    out_xi = np.empty((n_draws, 2))
    pnames = ["rho", "c", "s2_G", "s2_P", "s2_E"] + (["lam", "c_U", "s2_U"] if model.unemployment is not None else [])
    out_p = {n: np.empty(n_draws) for n in pnames}
    out_p["beta"] = np.empty((n_draws, k))
    total = burn_in + n_draws * thin
    kept = 0
    for sweep in range(total):
        g = draw_path(model, state, noise, rng)
        # transition regression, |rho| < 1 by rejection
        Z = np.column_stack([np.ones(T - 1), g[:-1], X[1:]])
        for _ in range(max_tries):
            stats["rho"][0] += 1
            coef = _draw_regression(rng, Z, g[1:], state["s2_G"], priors.coef_var)
            if abs(coef[1]) < 1.0:
                stats["rho"][1] += 1
                break
        else:
            raise ReconcileError(f"no stationary AR draw in {max_tries} proposals")
        state.update(c=coef[0], rho=coef[1], beta=coef[2:])
        resid = g[1:] - Z @ coef
        state["s2_G"] = _draw_ig(rng, priors.shape + 0.5 * resid.size,
                                 priors.scale_frac * ref_g + 0.5 * resid @ resid)
        if model.unemployment is not None:
            Zu = np.column_stack([np.ones(T), g])
            cu = _draw_regression(rng, Zu, model.unemployment, state["s2_U"], priors.coef_var)
            state.update(c_U=cu[0], lam=cu[1])
            ru = model.unemployment - Zu @ cu
            state["s2_U"] = _draw_ig(rng, priors.shape + 0.5 * T, priors.scale_frac * ref_u + 0.5 * ru @ ru)
        agg = _quarterly_sum(g)
        xis = np.empty(2)
        for j, name in enumerate(MEASURES):
            obs = np.isfinite(model.measures[:, j])
            V = agg[obs].var(ddof=1)
            if name in model.fixed_noise:
                xis[j] = V / (V + noise[name])
                if not lo < xis[j] < hi:
                    raise ReconcileError(f"fixed noise for {name} violates the xi interval")
                continue
            r = model.measures[obs, j] - agg[obs]
            shape = priors.shape + 0.5 * r.size
            scale = priors.scale_frac * ref_q[j] + 0.5 * r @ r
            st = stats[name]
            for _ in range(max_tries):
                st[0] += 1
                s2 = _draw_ig(rng, shape, scale)
                xi = V / (V + s2)
                if lo < xi < hi:
                    st[1] += 1
                    noise[name], xis[j] = s2, xi
                    break
            else:
                raise ReconcileError(
                    f"xi interval for {name} accepted none of {max_tries} variance draws "
                    f"(acceptance below {1 / max_tries:.1%}); priors inconsistent with the interval")
        if sweep >= burn_in and (sweep - burn_in) % thin == 0:
            out_g[kept] = g
            out_xi[kept] = xis
            vals = dict(state, s2_P=noise["GDP_P"], s2_E=noise["GDP_E"])
            for n in out_p:
                out_p[n][kept] = vals[n]
            kept += 1
    for name in ("GDP_P", "GDP_E"):
        prop, acc = stats[name]
        if prop and acc / prop < 0.01:
            raise ReconcileError(f"acceptance rate {acc / prop:.2%} for {name} is below 1%")
    return out_g, out_xi, out_p, stats


def reconcile_gibbs(model: MixedFrequencyGdpModel, n_draws: int = 5000, burn_in: int = 1000,
                    seed: int | None = None, chains: int = 4, thin: int = 1,
                    priors: GdpPriors = GdpPriors(), max_tries: int = 100,
                    keep_draws: bool = False) -> MonthlyGdpPosterior:
    """Gibbs sampler for the monthly GDP path; ``n_draws`` retained per chain.

    Chains use independent streams spawned from ``seed``.  A variance draw
    whose ratio falls outside the interval is redrawn; if no draw in
    ``max_tries`` (default 100, i.e. acceptance below 1 %) is accepted the
    run aborts with :class:`ReconcileError`.
    """
    if seed is None:
        raise ValueError("seed is required for reproducible sampling")
    if n_draws < 1 or chains < 1:
        raise ValueError("need n_draws >= 1 and chains >= 1")
    seeds = np.random.SeedSequence(seed).spawn(chains)
    res = [_run_chain(model, n_draws, burn_in, thin, make_rng(s), priors, max_tries) for s in seeds]
    G = np.concatenate([r[0] for r in res])
    xi = np.concatenate([r[1] for r in res])
    params = {n: np.concatenate([r[2][n] for r in res]) for n in res[0][2]}
    stats = {}
    for r in res:
        for kname, (p, a) in r[3].items():
            s = stats.setdefault(kname, [0, 0])
            s[0] += p
            s[1] += a
    acceptance = {kname: (a / p if p else 1.0) for kname, (p, a) in stats.items()}
    rejections = {kname: p - a for kname, (p, a) in stats.items()}
    q05, med, q95 = np.quantile(G, [0.05, 0.5, 0.95], axis=0)
    post = MonthlyGdpPosterior(model.dates, G.mean(axis=0), med, q05, q95, G.std(axis=0, ddof=1), G.shape[0], chains, acceptance,
                               rejections, xi, params, np.array([r[0].mean(axis=0) for r in res]),
                               G if keep_draws else None)
    if chains > 1 and post.chain_agreement > 0.05:
        log.warning("chain means differ by up to %.3f posterior SDs", post.chain_agreement)
    return post


def interpolate_flat(model: MixedFrequencyGdpModel, measure: str = "GDP_P") -> np.ndarray:
    """Benchmark: each quarter's measure spread evenly over its three months."""
    j = MEASURES.index(measure)
    return np.repeat(model.measures[:, j] / 3.0, 3)
