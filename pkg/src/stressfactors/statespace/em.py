"""Maximum-likelihood estimation of the dynamic factor model by EM."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..nsfactor import initial_loadings, sign_normalize
from ..panel import TimeSeriesPanel
from ..transforms import adf_test
from .kalman import SmootherResult, _obs, kalman_smoother
from .model import DIFFUSE_VARIANCE, StateSpaceModel, factor_model
from .summaries import factor_shares

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-8


class EMError(RuntimeError):
    pass


@dataclass
class EstimatedFactorModel:
    model: StateSpaceModel
    factors: np.ndarray           # (T, r) smoothed factor paths
    factor_var: np.ndarray        # (T, r) smoothed variances
    loglik_trace: np.ndarray
    stationary: np.ndarray        # (r,) bool, ADF rejects a unit root at 5 %
    adf_pvalues: np.ndarray
    explained: np.ndarray         # (r,) variance shares
    converged: bool
    n_iter: int
    status: str = "ok"
    dates: np.ndarray | None = None
    names: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.model.r

    @property
    def loadings(self) -> np.ndarray:
        return self.model.loadings

    def common_component(self) -> np.ndarray:
        return self.factors @ self.loadings.T


def fill_missing(Y: np.ndarray) -> np.ndarray:
    """Linear interpolation of NaN cells column by column (edges held constant)."""
    X = np.array(Y, dtype=float)
    t = np.arange(X.shape[0])
    for j in range(X.shape[1]):
        ok = np.isfinite(X[:, j])
        if not ok.any():
            raise ValueError(f"column {j} has no observations")
        if not ok.all():
            X[~ok, j] = np.interp(t[~ok], t[ok], X[ok, j])
    return X


def _ols_var(f: np.ndarray, p: int, intercept: bool):
    T, r = f.shape
    Z = [f[p - i - 1 : T - i - 1] for i in range(p)]
    if intercept:
        Z = [np.ones((T - p, 1))] + Z
    Z = np.hstack(Z)
    Y = f[p:]
    B, *_ = np.linalg.lstsq(Z, Y, rcond=None)
    E = Y - Z @ B
    Q = E.T @ E / max(T - p - Z.shape[1], 1)
    B = B.T
    d = B[:, 0] if intercept else np.zeros(r)
    coefs = B[:, 1:] if intercept else B
    return d, [coefs[:, i * r : (i + 1) * r] for i in range(p)], Q


def initial_model(Y: np.ndarray, r: int, p: int = 1, intercept: bool = True,
                  diffuse: float = DIFFUSE_VARIANCE) -> StateSpaceModel:
    """Starting values: generalized-covariance loadings, OLS VAR(p) on the projected factors."""
    X = fill_missing(Y)
    est = initial_loadings(X, r)
    f0 = est.factors
    d, coefs, Q = _ols_var(f0, p, intercept)
    Q = Q + 1e-6 * np.eye(r)
    resid = X - f0 @ est.loadings.T
    sig = np.maximum(resid.var(axis=0), 1e-4)
    a0 = np.tile(f0[0], p) if p == 1 else np.concatenate([f0[0]] * p)
    return factor_model(est.loadings, coefs, Q, sig, intercept=d, a0=a0, diffuse=diffuse)


def identify(model: StateSpaceModel) -> StateSpaceModel:
    """Rotate so the loadings are orthonormal with positive largest-magnitude entries."""
    Lf = model.loadings
    Qm, Rm = np.linalg.qr(Lf)
    signed = sign_normalize(Qm)
    S = np.sign(np.sum(signed * Qm, axis=0))
    return model.transform(S[:, None] * Rm)


def m_step(model: StateSpaceModel, Y: np.ndarray, sm: SmootherResult, intercept: bool = True) -> StateSpaceModel:
    r, n, p = model.r, model.n_states, model.p
    T, m = Y.shape
    a, P, Plag = sm.a_smooth, sm.P_smooth, sm.P_lag
    # transition: regress f_t on z_{t-1} = (1, alpha_{t-1})
    f_now = a[1:, :r]
    prev = a[:-1]
    Eaa_prev = P[:-1].sum(axis=0) + prev.T @ prev
    Efa = Plag[1:, :r, :].sum(axis=0) + f_now.T @ prev
    Eff = P[1:, :r, :r].sum(axis=0) + f_now.T @ f_now
    if intercept:
        Szz = np.empty((n + 1, n + 1))
        Szz[0, 0] = T - 1
        Szz[0, 1:] = Szz[1:, 0] = prev.sum(axis=0)
        Szz[1:, 1:] = Eaa_prev
        Sfz = np.hstack([f_now.sum(axis=0)[:, None], Efa])
    else:
        Szz, Sfz = Eaa_prev, Efa
    B = np.linalg.solve(Szz, Sfz.T).T
    Qn = (Eff - B @ Sfz.T) / (T - 1)
    Qn = 0.5 * (Qn + Qn.T)
    d = B[:, 0] if intercept else np.zeros(r)
    coefs = B[:, 1:] if intercept else B
    Phi = model.Phi.copy()
    Phi[:r, :] = coefs
    # measurement: row-wise regressions on the observed dates
    mask = np.isfinite(Y)
    af = a[:, :r]
    Pf = P[:, :r, :r]
    L = np.zeros((m, n))
    sig = np.empty(m)
    if mask.all():
        Sff = Pf.sum(axis=0) + af.T @ af
        Syf = Y.T @ af
        Lf = np.linalg.solve(Sff, Syf.T).T
        resid = Y - af @ Lf.T
        quad = np.einsum("ij,tjk,ik->i", Lf, Pf, Lf)
        sig = ((resid**2).sum(axis=0) + quad) / T
        L[:, :r] = Lf
    else:
        for i in range(m):
            o = mask[:, i]
            Sff = Pf[o].sum(axis=0) + af[o].T @ af[o]
            Li = np.linalg.solve(Sff, af[o].T @ Y[o, i])
            resid = Y[o, i] - af[o] @ Li
            sig[i] = (resid @ resid + Li @ Pf[o].sum(axis=0) @ Li) / o.sum()
            L[i, :r] = Li
    sig = np.maximum(sig, SIGMA_FLOOR)
    return model.replace(Phi=Phi, Q=Qn, L=L, sigma_eps=sig, intercept=d)


def _order_by_variance(model: StateSpaceModel, sm: SmootherResult):
    r = model.r
    var = sm.a_smooth[:, :r].var(axis=0)
    order = np.argsort(-var, kind="stable")
    Pm = np.eye(r)[order]
    return model.transform(Pm), Pm


def em_estimate(panel, r: int, p: int = 1, max_iter: int = 500, tol: float = 1e-6,
                ll_tol: float = 1e-8, intercept: bool = True, init: StateSpaceModel | None = None,
                diffuse: float = DIFFUSE_VARIANCE, strict: bool = True) -> EstimatedFactorModel:
    """Fit the factor model by EM on the Kalman-smoothed moments.

    Each iteration runs the smoother (E-step), updates the transition
    coefficients, factor innovation covariance, loadings and noise variances
    in closed form (M-step), then re-orthonormalizes the loadings by QR and
    absorbs the rotation into the factor dynamics.  Iteration stops when the
    relative change of the log-likelihood drops below ``tol`` or after
    ``max_iter`` iterations.  A log-likelihood decrease larger than ``ll_tol``
    raises :class:`EMError` when ``strict``.
    """
    Y = _obs(panel)
    T, m = Y.shape
    if not 0 < r < m:
        raise ValueError(f"need 0 < r < m, got r={r}, m={m}")
    model = identify(init if init is not None else initial_model(Y, r, p, intercept, diffuse))
    trace = []
    converged = False
    status = "ok"
    sm = kalman_smoother(model, Y)
    trace.append(sm.loglik)
    it = 0
    for it in range(1, max_iter + 1):
        model = identify(m_step(model, Y, sm, intercept))
        sm = kalman_smoother(model, Y)
        ll_new = sm.loglik
        change = ll_new - trace[-1]
        trace.append(ll_new)
        if change < -ll_tol:
            msg = f"log-likelihood decreased by {-change:.3g} at iteration {it}"
            if strict:
                raise EMError(msg)
            warnings.warn(msg, RuntimeWarning)
            status = "decrease"
        if abs(change) < tol * max(abs(trace[-2]), 1.0):
            converged = True
            break
    if not converged:
        status = "max_iter"
        warnings.warn(f"EM did not converge in {max_iter} iterations", RuntimeWarning)
    model, _ = _order_by_variance(model, sm)
    sm = kalman_smoother(model, Y)
    f = sm.a_smooth[:, :r]
    fvar = np.einsum("tii->ti", sm.P_smooth[:, :r, :r])
    pvals = np.array([adf_test(f[:, j]).p_value for j in range(r)])
    shares = factor_shares(f, model.loadings, Y)
    log.info("EM finished after %d iterations, loglik %.6f", it, sm.loglik)
    dates = panel.dates if isinstance(panel, TimeSeriesPanel) else None
    names = panel.names if isinstance(panel, TimeSeriesPanel) else ()
    return EstimatedFactorModel(model, f, fvar, np.asarray(trace), pvals < 0.05, pvals, shares,
                                converged, it, status, dates, names)
