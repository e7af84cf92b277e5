"""Kalman filter, fixed-interval smoother and forward-filter backward-sampler.

Missing observations (NaN) are handled by dropping the corresponding rows of
the measurement equation at that date.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..panel import TimeSeriesPanel
from .model import StateSpaceModel

LOG2PI = math.log(2.0 * math.pi)


class KalmanError(FloatingPointError):
    pass


def _obs(y) -> np.ndarray:
    y = y.values if isinstance(y, TimeSeriesPanel) else np.asarray(y, dtype=float)
    return y[:, None] if y.ndim == 1 else y


@dataclass
class FilterResult:
    a_pred: np.ndarray   # (T, n)   E[alpha_t | y_1..y_{t-1}]
    P_pred: np.ndarray   # (T, n, n)
    a_filt: np.ndarray   # (T, n)   E[alpha_t | y_1..y_t]
    P_filt: np.ndarray
    loglik_terms: np.ndarray

    @property
    def loglik(self) -> float:
        return float(self.loglik_terms.sum())


@dataclass
class SmootherResult:
    a_smooth: np.ndarray  # (T, n)
    P_smooth: np.ndarray  # (T, n, n)
    P_lag: np.ndarray     # (T, n, n): Cov(alpha_t, alpha_{t-1} | Y); row 0 unused
    filtered: FilterResult

    @property
    def loglik(self) -> float:
        return self.filtered.loglik


def kalman_filter(model: StateSpaceModel, y) -> FilterResult:
    """Run the prediction/update recursions; returns filtered and one-step predicted moments."""
    Y = _obs(y)
    T, m = Y.shape
    if m != model.m:
        raise ValueError(f"model has {model.m} series, data has {m}")
    n = model.n_states
    Phi, c, RQR = model.Phi, model.c, model.RQR
    Z_all, h_all = model.L, model.sigma_eps
    a_pred = np.empty((T, n))
    P_pred = np.empty((T, n, n))
    a_filt = np.empty((T, n))
    P_filt = np.empty((T, n, n))
    ll = np.zeros(T)
    mask = np.isfinite(Y)
    full = mask.all(axis=1)
    a, P = model.a0.copy(), model.P0.copy()
    for t in range(T):
        a_pred[t], P_pred[t] = a, P
        if full[t]:
            Z, h, v = Z_all, h_all, Y[t] - Z_all @ a
        else:
            obs = mask[t]
            if not obs.any():
                a_filt[t], P_filt[t] = a, P
                a, P = c + Phi @ a, Phi @ P @ Phi.T + RQR
                continue
            Z, h = Z_all[obs], h_all[obs]
            v = Y[t, obs] - Z @ a
        PZ = P @ Z.T
        F = Z @ PZ
        F[np.diag_indices_from(F)] += h
        if not np.all(np.isfinite(F)):
            raise KalmanError(f"non-finite innovation covariance at t={t}")
        try:
            cf = linalg.cho_factor(F, lower=True, check_finite=False)
        except linalg.LinAlgError:
            raise KalmanError(f"innovation covariance not positive definite at t={t}") from None
        Finv_v = linalg.cho_solve(cf, v, check_finite=False)
        K = linalg.cho_solve(cf, PZ.T, check_finite=False).T
        logdet = 2.0 * np.log(np.diag(cf[0])).sum()
        ll[t] = -0.5 * (v.size * LOG2PI + logdet + v @ Finv_v)
        a = a + PZ @ Finv_v
        P = P - K @ PZ.T
        P = 0.5 * (P + P.T)
        a_filt[t], P_filt[t] = a, P
        a, P = c + Phi @ a, Phi @ P @ Phi.T + RQR
    return FilterResult(a_pred, P_pred, a_filt, P_filt, ll)


def _gain(P_f: np.ndarray, Phi: np.ndarray, P_p: np.ndarray) -> np.ndarray:
    """``P_f Phi' P_p^{-1}``, falling back to a pseudo-inverse when ``P_p`` is singular."""
    B = P_f @ Phi.T
    try:
        cf = linalg.cho_factor(P_p, lower=True, check_finite=False)
        return linalg.cho_solve(cf, B.T, check_finite=False).T
    except linalg.LinAlgError:
        return B @ np.linalg.pinv(P_p, rcond=1e-12, hermitian=True)


def kalman_smoother(model: StateSpaceModel, y, filtered: FilterResult | None = None) -> SmootherResult:
    """Rauch-Tung-Striebel fixed-interval smoother with lag-one covariances."""
    f = kalman_filter(model, y) if filtered is None else filtered
    T, n = f.a_filt.shape
    Phi = model.Phi
    a_s = np.empty_like(f.a_filt)
    P_s = np.empty_like(f.P_filt)
    P_lag = np.zeros_like(f.P_filt)
    a_s[-1], P_s[-1] = f.a_filt[-1], f.P_filt[-1]
    for t in range(T - 2, -1, -1):
        J = _gain(f.P_filt[t], Phi, f.P_pred[t + 1])
        a_s[t] = f.a_filt[t] + J @ (a_s[t + 1] - f.a_pred[t + 1])
        P = f.P_filt[t] + J @ (P_s[t + 1] - f.P_pred[t + 1]) @ J.T
        P_s[t] = 0.5 * (P + P.T)
        P_lag[t + 1] = P_s[t + 1] @ J.T
    return SmootherResult(a_s, P_s, P_lag, f)


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    """Square root ``B`` with ``B B' = S`` that tolerates semidefinite ``S``."""
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(0.5 * (S + S.T))
        return v * np.sqrt(np.clip(w, 0.0, None))


def ffbs(model: StateSpaceModel, y, rng: np.random.Generator, filtered: FilterResult | None = None) -> np.ndarray:
    """Draw one state path from ``p(alpha_1..alpha_T | y)``.

    Forward pass is :func:`kalman_filter`; the backward pass conditions each
    ``alpha_t`` on the draw of the full ``alpha_{t+1}``, which keeps the
    companion-form identities exact.
    """
    f = kalman_filter(model, y) if filtered is None else filtered
    T, n = f.a_filt.shape
    Phi = model.Phi
    draws = np.empty((T, n))
    z = rng.standard_normal((T, n))
    draws[-1] = f.a_filt[-1] + psd_sqrt(f.P_filt[-1]) @ z[-1]
    for t in range(T - 2, -1, -1):
        J = _gain(f.P_filt[t], Phi, f.P_pred[t + 1])
        mean = f.a_filt[t] + J @ (draws[t + 1] - f.a_pred[t + 1])
        cov = f.P_filt[t] - J @ Phi @ f.P_filt[t]
        draws[t] = mean + psd_sqrt(0.5 * (cov + cov.T)) @ z[t]
    return draws
