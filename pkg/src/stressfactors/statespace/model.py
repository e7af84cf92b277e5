from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

DIFFUSE_VARIANCE = 1e7


@dataclass(frozen=True)
class StateSpaceModel:
    """Linear Gaussian model for a dynamic factor panel.

    State ``alpha_t = (f_t, f_{t-1}, ..., f_{t-p+1})`` of dimension ``r*p``::

        y_t      = L alpha_t + e_t,                     e_t ~ N(0, diag(sigma_eps))
        alpha_t  = c + Phi alpha_{t-1} + R u_t,         u_t ~ N(0, Q)
        alpha_1  ~ N(a0, P0)

    ``Phi`` is in companion form, ``R = [I_r; 0]`` and ``c = [intercept; 0]``.
    Only the first ``r`` columns of ``L`` are nonzero.
    """

    Phi: np.ndarray
    Q: np.ndarray
    L: np.ndarray
    sigma_eps: np.ndarray
    intercept: np.ndarray
    a0: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        for name in ("Phi", "Q", "L", "sigma_eps", "intercept", "a0", "P0"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        n, r, m = self.Phi.shape[0], self.Q.shape[0], self.L.shape[0]
        if self.Phi.shape != (n, n) or n % r:
            raise ValueError(f"Phi must be square with size a multiple of r={r}")
        if self.L.shape != (m, n):
            raise ValueError(f"L must be {m} x {n}, got {self.L.shape}")
        if self.sigma_eps.shape != (m,) or np.any(self.sigma_eps < 0):
            raise ValueError("sigma_eps must be a nonnegative vector of length m")
        if self.intercept.shape != (r,) or self.a0.shape != (n,) or self.P0.shape != (n, n):
            raise ValueError("intercept, a0 or P0 has the wrong shape")
        p = n // r
        if p > 1:
            lower = self.Phi[r:, :]
            expect = np.hstack([np.eye(n - r), np.zeros((n - r, r))])
            if not np.array_equal(lower, expect):
                raise ValueError("Phi is not in companion form")

    @property
    def r(self) -> int:
        return self.Q.shape[0]

    @property
    def n_states(self) -> int:
        return self.Phi.shape[0]

    @property
    def p(self) -> int:
        return self.n_states // self.r

    @property
    def m(self) -> int:
        return self.L.shape[0]

    @property
    def loadings(self) -> np.ndarray:
        return self.L[:, : self.r]

    @property
    def c(self) -> np.ndarray:
        return np.r_[self.intercept, np.zeros(self.n_states - self.r)]

    @property
    def RQR(self) -> np.ndarray:
        out = np.zeros((self.n_states, self.n_states))
        out[: self.r, : self.r] = self.Q
        return out

    @property
    def var_coefs(self) -> list[np.ndarray]:
        r = self.r
        return [self.Phi[:r, i * r : (i + 1) * r] for i in range(self.p)]

    def replace(self, **kw) -> "StateSpaceModel":
        return replace(self, **kw)

    def transform(self, A: np.ndarray) -> "StateSpaceModel":
        """Reparametrize the factors as ``f' = A f``; the distribution of ``y`` is unchanged."""
        p = self.p
        Tm = np.kron(np.eye(p), A)
        Tinv = np.kron(np.eye(p), np.linalg.inv(A))
        Phi = Tm @ self.Phi @ Tinv
        if p > 1:
            # exact companion rows, not round-off
            r, n = self.r, self.n_states
            Phi[r:, :] = np.hstack([np.eye(n - r), np.zeros((n - r, r))])
        return StateSpaceModel(
            Phi=Phi,
            Q=_sym(A @ self.Q @ A.T),
            L=self.L @ Tinv,
            sigma_eps=self.sigma_eps,
            intercept=A @ self.intercept,
            a0=Tm @ self.a0,
            P0=_sym(Tm @ self.P0 @ Tm.T),
        )


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def companion(coefs: list[np.ndarray]) -> np.ndarray:
    r = coefs[0].shape[0]
    p = len(coefs)
    Phi = np.zeros((r * p, r * p))
    Phi[:r, :] = np.hstack(coefs)
    if p > 1:
        Phi[r:, :-r] = np.eye(r * (p - 1))
    return Phi


def factor_model(loadings, var_coefs, Q, sigma_eps, intercept=None, a0=None, P0=None,
                 diffuse: float = DIFFUSE_VARIANCE) -> StateSpaceModel:
    """Build a :class:`StateSpaceModel` from loadings and VAR(p) coefficient blocks."""
    loadings = np.atleast_2d(np.asarray(loadings, dtype=float))
    coefs = [np.atleast_2d(np.asarray(c, dtype=float)) for c in var_coefs]
    m, r = loadings.shape
    n = r * len(coefs)
    L = np.zeros((m, n))
    L[:, :r] = loadings
    return StateSpaceModel(
        Phi=companion(coefs),
        Q=np.atleast_2d(Q),
        L=L,
        sigma_eps=np.atleast_1d(np.asarray(sigma_eps, dtype=float)),
        intercept=np.zeros(r) if intercept is None else intercept,
        a0=np.zeros(n) if a0 is None else a0,
        P0=diffuse * np.eye(n) if P0 is None else P0,
    )
