"""Linear quantile regression.

The pinball objective is minimized by iteratively reweighted least squares on
a smoothed loss, ``0.5*sqrt(r^2 + eps^2) + (tau - 0.5)*r``, with ``eps``
annealed towards zero.  The smoothed solution is then snapped to an exact
vertex (``p`` interpolated observations) whose optimality is verified by the
subgradient condition; if the check fails, simplex-style basis exchanges
continue from there.  Any remaining failure falls back to the HiGHS
linear-programming solver.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import optimize, sparse

log = logging.getLogger(__name__)

CERT_TOL = 1e-9
ZERO_TOL = 1e-12


class QuantRegError(ValueError):
    pass


@dataclass(frozen=True)
class QuantileFit:
    tau: float
    coefficients: np.ndarray
    loss: float        # in-sample pinball loss sum
    n: int
    p: int
    method: str = "vertex"

    @property
    def mean_loss(self) -> float:
        return self.loss / self.n

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coefficients


def pinball(residuals, tau) -> np.ndarray:
    """Elementwise check loss ``r * (tau - 1{r < 0})``."""
    r = np.asarray(residuals, dtype=float)
    return r * (tau - (r < 0))


def _validate(y, X, taus):
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if y.ndim != 1 or X.shape[0] != y.size:
        raise QuantRegError(f"y has {y.size} rows, X has {X.shape[0]}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise QuantRegError("y and X must be finite")
    n, p = X.shape
    if n < p + 2:
        raise QuantRegError(f"need n >= p + 2, got n={n}, p={p}")
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any((taus <= 0) | (taus >= 1)):
        raise QuantRegError("tau must lie strictly between 0 and 1")
    if np.linalg.matrix_rank(X) < p:
        raise QuantRegError("design matrix is rank deficient")
    return y, X, taus


def _irls(y, X, taus, n_iter=3):
    """Batched smoothed-pinball IRLS over all quantile levels; returns (K, p)."""
    scale = max(np.std(y), 1e-12)
    B = np.tile(np.linalg.lstsq(X, y, rcond=None)[0], (taus.size, 1))
    shift = (taus - 0.5)[:, None] * X.sum(axis=0)
    for eps in scale * np.logspace(0, -8, 9):
        for _ in range(n_iter):
            r = y - B @ X.T
            w = 0.5 / np.sqrt(r * r + eps * eps)
            A = np.einsum("kn,ni,nj->kij", w, X, X)
            b = (w * y) @ X + shift
            try:
                B = np.linalg.solve(A, b[..., None])[..., 0]
            except np.linalg.LinAlgError:
                return B
    return B


def _vertex(y, X, tau, basis):
    """Vertex on ``basis``: coefficients, residuals and dual vector ``v``.

    Optimality holds iff ``v`` lies in ``[tau-1, tau]^p``.
    """
    Xh = X[basis]
    beta = np.linalg.solve(Xh, y[basis])
    r = y - X @ beta
    r[np.abs(r) <= ZERO_TOL * (1.0 + np.abs(y))] = 0.0
    r[basis] = 0.0
    psi = np.where(r > 0, tau, tau - 1.0)
    psi[basis] = 0.0
    v = -np.linalg.solve(Xh.T, X.T @ psi)
    return beta, r, v


def _degenerate_optimal(X, tau, r):
    """Subgradient check when more than ``p`` residuals are zero.

    Zero-residual observations may take any weight in ``[tau-1, tau]``; the
    vertex is optimal iff some choice balances the signed-residual weights.
    """
    zero = r == 0
    psi = np.where(r > 0, tau, tau - 1.0)[~zero]
    target = -(X[~zero].T @ psi)
    Xz = X[zero]
    res = optimize.linprog(np.zeros(Xz.shape[0]), A_eq=Xz.T, b_eq=target,
                           bounds=[(tau - 1.0, tau)] * Xz.shape[0], method="highs")
    return res.status == 0


def _descend(y, X, tau, basis, max_pivots=200):
    """Exchange basis observations until the vertex is optimal; None if that fails."""
    basis = np.array(basis)
    for _ in range(max_pivots):
        try:
            beta, r, v = _vertex(y, X, tau, basis)
        except np.linalg.LinAlgError:
            return None
        gap = np.maximum(v - tau, tau - 1.0 - v)
        j = int(np.argmax(gap))
        if gap[j] <= CERT_TOL:
            return beta
        if np.count_nonzero(r == 0) > len(basis) and _degenerate_optimal(X, tau, r):
            return beta
        # move so basis point j leaves with slope g < 0
        sigma = 1.0 if v[j] < tau - 1.0 else -1.0
        g = -gap[j]
        delta = sigma * np.linalg.solve(X[basis], np.eye(len(basis))[j])
        xd = X @ delta
        xd[basis] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = r / xd
        # points whose residual changes sign; zero residuals count as negative
        cand = np.flatnonzero(((r != 0) & (xd != 0) & (t > 0)) | ((r == 0) & (xd < 0)))
        t[r == 0] = 0.0
        if cand.size == 0:
            return None
        cand = cand[np.argsort(t[cand], kind="stable")]
        slope = g + np.cumsum(np.abs(xd[cand]))
        k = int(np.argmax(slope >= 0))
        if slope[k] < 0:
            return None
        basis = basis.copy()
        basis[j] = cand[k]
    return None


def _snap(y, X, tau, beta):
    p = X.shape[1]
    order = np.argsort(np.abs(y - X @ beta), kind="stable")
    # start from the p best-fitting points that form a nonsingular basis
    basis = []
    for i in order:
        trial = basis + [i]
        if np.linalg.matrix_rank(X[trial]) == len(trial):
            basis = trial
            if len(basis) == p:
                break
    return _descend(y, X, tau, basis)


def _linprog(y, X, tau):
    n, p = X.shape
    c = np.r_[np.zeros(p), np.full(n, tau), np.full(n, 1.0 - tau)]
    I = sparse.identity(n, format="csc")
    A = sparse.hstack([sparse.csc_matrix(X), I, -I], format="csc")
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = optimize.linprog(c, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        raise QuantRegError(f"linear program failed: {res.message}")
    return res.x[:p]


def qr_fit_grid(y, X, taus) -> list[QuantileFit]:
    """Fit the quantile regression of ``y`` on ``X`` at every level in ``taus``."""
    y, X, taus = _validate(y, X, taus)
    n, p = X.shape
    B = _irls(y, X, taus)
    fits = []
    for k, tau in enumerate(taus):
        beta = _snap(y, X, tau, B[k])
        method = "vertex"
        if beta is None:
            log.debug("no certified vertex at tau=%g, using linprog", tau)
            beta, method = _linprog(y, X, tau), "linprog"
        loss = float(pinball(y - X @ beta, tau).sum())
        fits.append(QuantileFit(float(tau), beta, max(loss, 0.0), n, p, method))
    return fits


def qr_fit(y, X, tau: float) -> QuantileFit:
    """Minimize ``sum rho_tau(y - X beta)`` over ``beta``.

    Parameters
    ----------
    y : (n,) array
    X : (n, p) array
        Design matrix, intercept column included by the caller.
    tau : float in (0, 1)

    Raises
    ------
    QuantRegError
        For ``tau`` outside (0, 1), rank-deficient ``X`` or ``n < p + 2``.
    """
    return qr_fit_grid(y, X, [tau])[0]
