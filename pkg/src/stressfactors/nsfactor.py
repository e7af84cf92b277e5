"""Factor extraction for panels that may contain integrated series.

Generalized lag covariances, squared canonical correlations between ``X_t``
and ``X_{t-k}``, the chi-square test for the number of common factors and
initial loading estimates from the lag-1 generalized covariance.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg, special, stats

from .panel import TimeSeriesPanel

DEFAULT_LAGS = (1, 2, 3, 4, 5)
MAX_CONDITION = 1e12


class FactorError(ValueError):
    pass


def _data(panel) -> np.ndarray:
    x = panel.values if isinstance(panel, TimeSeriesPanel) else np.asarray(panel, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.isfinite(x).all():
        raise FactorError("panel has missing values; factor extraction needs a complete panel")
    return x


@dataclass(frozen=True)
class GeneralizedCovariance:
    k: int
    d: int
    D: int
    matrix: np.ndarray
    T_used: int

    @property
    def symmetric(self) -> np.ndarray:
        return 0.5 * (self.matrix + self.matrix.T)


def generalized_cov(panel, k: int = 1, d: int = 1, D: int = 0) -> GeneralizedCovariance:
    """Lag-``k`` covariance normalized by ``T**(2d + D)``.

    Entry (i, j) is ``sum_t (x_{t-k,i} - mean_i)(x_{t,j} - mean_j)``, with the
    full-sample mean.  When ``2d + D`` is zero the ordinary ``1/T`` scaling is
    used so the stationary case reduces to the sample autocovariance.
    """
    x = _data(panel)
    T = x.shape[0]
    if k < 0 or k >= T:
        raise FactorError(f"lag k={k} must satisfy 0 <= k < T={T}")
    if T <= k + 2:
        raise FactorError(f"need T > k + 2, got T={T}, k={k}")
    if D not in (0, 1) or d < 0:
        raise FactorError("need d >= 0 and D in {0, 1}")
    xc = x - x.mean(axis=0)
    power = 2 * d + D or 1
    c = xc[: T - k].T @ xc[k:] / float(T) ** power
    return GeneralizedCovariance(k, d, D, c, T - k)


def detect_drift(panel, d: int = 1, level: float = 0.05) -> int:
    """1 if the cross-sectional mean of the d-th differences has a nonzero mean (t-test)."""
    x = _data(panel)
    z = np.diff(x, n=d, axis=0).mean(axis=1) if d > 0 else x.mean(axis=1)
    t = z.mean() / (z.std(ddof=1) / math.sqrt(z.size))
    return int(2 * stats.t.sf(abs(t), z.size - 1) < level)


def _inv_sqrt_psd(s: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(s)
    return (v / np.sqrt(w)) @ v.T


def _check_gram(s: np.ndarray, label: str) -> None:
    w = np.linalg.eigvalsh(s)
    cond = w[-1] / w[0] if w[0] > 0 else np.inf
    if not cond < MAX_CONDITION:
        raise FactorError(f"{label} Gram matrix is singular (condition number {cond:.3g})")


def canonical_matrix(panel, k: int = 1) -> np.ndarray:
    """Symmetric form of the squared canonical covariance matrix at lag ``k``.

    Returns ``S00^{-1/2} S0k Skk^{-1} Sk0 S00^{-1/2}`` built from uncentred
    cross products over t = k+1..T.  It is similar to
    ``S00^{-1} S0k Skk^{-1} Sk0`` and so has the same eigenvalues: the squared
    canonical correlations between ``X_t`` and ``X_{t-k}``.
    """
    x = _data(panel)
    T = x.shape[0]
    if not 0 < k < T - 1:
        raise FactorError(f"lag k={k} out of range for T={T}")
    x0, xk = x[k:], x[:-k]
    s00 = x0.T @ x0
    skk = xk.T @ xk
    s0k = x0.T @ xk
    _check_gram(s00, "contemporaneous")
    _check_gram(skk, f"lag-{k}")
    w0 = _inv_sqrt_psd(s00)
    a = w0 @ s0k
    m = a @ np.linalg.solve(skk, a.T)
    return 0.5 * (m + m.T)


def canonical_eigenvalues(panel, k: int = 1) -> np.ndarray:
    """Squared canonical correlations at lag ``k``, in decreasing order."""
    return np.sort(np.linalg.eigvalsh(canonical_matrix(panel, k)))[::-1]


def chi2_quantile(p: float, dof: int) -> float:
    """Inverse CDF of the chi-square distribution, via the regularized incomplete gamma."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if dof <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    return 2.0 * float(special.gammaincinv(dof / 2.0, p))


def s_statistic(eigenvalues: Sequence[float], r: int, n_eff: int) -> float:
    """``-(T-k) * sum log(1 - lambda_j)`` over the ``m - r`` smallest eigenvalues."""
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    tail = np.clip(lam[: lam.size - r], 0.0, 1.0 - 1e-15)
    return float(-n_eff * np.sum(np.log1p(-tail)))


def sequential_rule(stats_by_r: Sequence[float], crit_by_r: Sequence[float]) -> int:
    """First candidate r whose statistic does not exceed its critical value.

    Returns ``len(stats_by_r)`` when every candidate is rejected.
    """
    for r, (s, q) in enumerate(zip(stats_by_r, crit_by_r)):
        if not s > q:
            return r
    return len(stats_by_r)


@dataclass(frozen=True)
class FactorNumberTable:
    lags: tuple
    q05: np.ndarray          # (m,)
    q95: np.ndarray          # (m,)
    stats: np.ndarray        # (m, len(lags))
    level: float = 0.05
    decision_lag: int = 1
    dof: np.ndarray = field(default=None)

    @property
    def m(self) -> int:
        return self.stats.shape[0]

    @property
    def reject(self) -> np.ndarray:
        return self.stats > self.q95[:, None]

    def rows(self):
        for r in range(self.m):
            yield r, self.q05[r], self.q95[r], self.stats[r], self.reject[r]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "q05", "q95", *[f"S_k{k}" for k in self.lags], *[f"reject_k{k}" for k in self.lags]])
            for r, q05, q95, s, rej in self.rows():
                w.writerow([r, f"{q05:.3f}", f"{q95:.3f}", *[f"{v:.3f}" for v in s], *[int(b) for b in rej]])
        return path


def factor_number_test(panel, lag_set: Sequence[int] = DEFAULT_LAGS, level: float = 0.05,
                       decision_lag: int | None = None) -> tuple[int, FactorNumberTable]:
    """Select the number of common factors by the sequential chi-square test.

    For r = 0, 1, ... the statistic built from the ``m - r`` smallest squared
    canonical correlations is compared with the upper ``1 - level`` quantile of
    a chi-square with ``(m - r)**2`` degrees of freedom; the first r that is
    not rejected at ``decision_lag`` (default: smallest lag in ``lag_set``) is
    returned together with the full table.
    """
    lags = tuple(int(k) for k in lag_set)
    if not lags:
        raise FactorError("lag_set must be nonempty")
    decision_lag = lags[0] if decision_lag is None else decision_lag
    if decision_lag not in lags:
        raise FactorError(f"decision lag {decision_lag} not in lag set {lags}")
    x = _data(panel)
    T, m = x.shape
    stats_tab = np.empty((m, len(lags)))
    for j, k in enumerate(lags):
        lam = canonical_eigenvalues(x, k)
        for r in range(m):
            stats_tab[r, j] = s_statistic(lam, r, T - k)
    dof = (m - np.arange(m)) ** 2
    q05 = np.array([chi2_quantile(level, int(v)) for v in dof])
    q95 = np.array([chi2_quantile(1.0 - level, int(v)) for v in dof])
    table = FactorNumberTable(lags, q05, q95, stats_tab, level, decision_lag, dof)
    r = sequential_rule(stats_tab[:, lags.index(decision_lag)], q95)
    if r == m:
        warnings.warn(f"every candidate up to r={m - 1} rejected; returning r={m - 1}", RuntimeWarning)
        r = m - 1
    return r, table


def scaling_matrix(T: int, d_list: Sequence[int] = (), r2: int = 0) -> np.ndarray:
    """Diagonal normalization: ``1/T**d_i`` per integrated factor, ``1/sqrt(T)`` per stationary one."""
    if T <= 1:
        raise ValueError("T must exceed 1")
    d_list = list(d_list)
    if not d_list and r2 <= 0:
        raise ValueError("empty factor specification")
    if any(d < 1 for d in d_list):
        raise ValueError("integration orders must be >= 1")
    diag = [float(T) ** -d for d in d_list] + [float(T) ** -0.5] * r2
    return np.diag(diag)


def sign_normalize(loadings: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    L = np.array(loadings, dtype=float)
    idx = np.argmax(np.abs(L), axis=0)
    signs = np.sign(L[idx, np.arange(L.shape[1])])
    signs[signs == 0] = 1.0
    return L * signs


@dataclass(frozen=True)
class InitialFactorEstimate:
    loadings: np.ndarray     # m x r, orthonormal columns
    factors: np.ndarray      # T x r
    eigenvalues: np.ndarray  # r
    scaled_factors: np.ndarray | None = None


def initial_loadings(panel, r: int, d: int = 1, D: int = 0,
                     integration_orders: Sequence[int] | None = None) -> InitialFactorEstimate:
    """Loadings from the top-``r`` eigenvectors of the symmetrized lag-1 generalized covariance.

    Factors are the projections ``X_t @ L0``.  If ``integration_orders`` is
    given (one entry per factor, 0 for stationary) the factor paths are also
    returned rescaled by :func:`scaling_matrix`.
    """
    x = _data(panel)
    T, m = x.shape
    if not 0 < r < m:
        raise FactorError(f"need 0 < r < m, got r={r}, m={m}")
    c = generalized_cov(x, 1, d, D).symmetric
    try:
        w, v = linalg.eigh(c)
    except linalg.LinAlgError as exc:
        raise FactorError(f"eigen-decomposition failed: {exc}") from exc
    order = np.argsort(w)[::-1][:r]
    L0 = sign_normalize(v[:, order])
    f0 = x @ L0
    scaled = None
    if integration_orders is not None:
        orders = list(integration_orders)
        if len(orders) != r:
            raise FactorError("integration_orders needs one entry per factor")
        nonst = [o for o in orders if o > 0]
        theta = scaling_matrix(T, nonst, len(orders) - len(nonst))
        # theta lists integrated factors first; map back to factor order
        perm = [i for i, o in enumerate(orders) if o > 0] + [i for i, o in enumerate(orders) if o == 0]
        diag = np.empty(r)
        diag[perm] = np.diag(theta)
        scaled = f0 * diag
    return InitialFactorEstimate(L0, f0, w[order], scaled)


def principal_angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    """Largest principal angle (degrees) between the column spans of ``a`` and ``b``."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.degrees(np.arccos(np.clip(s.min(), -1.0, 1.0))))
