"""Gibbs sampler for the dynamic factor model (forward-filter backward-sample states)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .em import identify, initial_model
from .kalman import _obs, ffbs
from .model import DIFFUSE_VARIANCE, StateSpaceModel


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class BayesPriors:
    """Weakly informative conjugate priors.

    Loadings rows ~ N(0, loading_var I); VAR coefficients (intercept
    included) ~ N(0, coef_var I); noise variances ~ IG(sigma_shape,
    sigma_scale); factor innovation covariance ~ IW(q_dof, q_dof_scale * I).
    """

    loading_var: float = 10.0
    coef_var: float = 10.0
    sigma_shape: float = 2.0
    sigma_scale: float = 0.1
    q_dof: float | None = None
    q_scale: float = 0.1


@dataclass
class PosteriorDraws:
    loadings: np.ndarray   # (n, m, r)
    var_coefs: np.ndarray  # (n, r, r*p)
    intercept: np.ndarray  # (n, r)
    Q: np.ndarray          # (n, r, r)
    sigma_eps: np.ndarray  # (n, m)
    factors: np.ndarray    # (n, T, r)
    rejections: int
    seed: int

    @property
    def factor_mean(self) -> np.ndarray:
        return self.factors.mean(axis=0)

    @property
    def factor_sd(self) -> np.ndarray:
        return self.factors.std(axis=0, ddof=1) if len(self.factors) > 1 else np.zeros(self.factors.shape[1:])


def _draw_gaussian(rng, precision, rhs):
    """Draw from N(precision^{-1} rhs, precision^{-1}); raises LinAlgError if not PD."""
    C = np.linalg.cholesky(precision)
    mean = np.linalg.solve(C.T, np.linalg.solve(C, rhs))
    return mean + np.linalg.solve(C.T, rng.standard_normal(rhs.shape))


def _retry(fn, max_tries=100):
    rejected = 0
    for _ in range(max_tries):
        try:
            return fn(), rejected
        except np.linalg.LinAlgError:
            rejected += 1
    raise SamplerError(f"{max_tries} consecutive draws were not positive definite")


def ffbs_sample(panel, r: int, p: int = 1, priors: BayesPriors = BayesPriors(), n_draws: int = 1000,
                seed: int | None = None, burn_in: int = 200, thin: int = 1,
                intercept: bool = True, init: StateSpaceModel | None = None,
                diffuse: float = DIFFUSE_VARIANCE) -> PosteriorDraws:
    """Draw from the posterior of loadings, VAR(p) dynamics, variances and factor paths.

    One Gibbs sweep: factor paths by FFBS given parameters; each loading row
    and its noise variance from their Normal / inverse-gamma conditionals;
    the VAR coefficients given Q and Q given the coefficients
    (Normal / inverse-Wishart).  Each draw is rotated so that the loadings are
    orthonormal with positive largest-magnitude entries.  Draws whose
    covariance is not positive definite are redrawn and counted in
    ``rejections``.
    """
    if seed is None:
        raise ValueError("seed is required for reproducible sampling")
    rng = np.random.Generator(np.random.PCG64(seed))
    Y = _obs(panel)
    T, m = Y.shape
    mask = np.isfinite(Y)
    model = identify(init if init is not None else initial_model(Y, r, p, intercept, diffuse))
    n = r * p
    q_dof = priors.q_dof if priors.q_dof is not None else r + 2.0
    k = n + int(intercept)
    total = burn_in + n_draws * thin
    out = dict(L=[], B=[], d=[], Q=[], s=[], f=[])
    rejections = 0
    sig = model.sigma_eps.copy()
    a0, P0 = model.a0, model.P0
    for sweep in range(total):
        states = ffbs(model, Y, rng)
        f = states[:, :r]
        # measurement block
        L = np.empty((m, r))
        for i in range(m):
            o = mask[:, i]
            F, y = f[o], Y[o, i]

            def one():
                prec = np.eye(r) / priors.loading_var + F.T @ F / sig[i]
                return _draw_gaussian(rng, prec, F.T @ y / sig[i])

            L[i], kk = _retry(one)
            rejections += kk
            resid = y - F @ L[i]
            sig[i] = (priors.sigma_scale + 0.5 * resid @ resid) / rng.gamma(priors.sigma_shape + 0.5 * o.sum())
        # transition block: f_t = B z_{t-1} + u_t
        Z = states[:-1]
        if intercept:
            Z = np.hstack([np.ones((T - 1, 1)), Z])
        Fn = f[1:]
        Qinv = np.linalg.inv(model.Q)

        def draw_b():
            prec = np.eye(k * r) / priors.coef_var + np.kron(Z.T @ Z, Qinv)
            rhs = (Qinv @ Fn.T @ Z).ravel(order="F")
            return _draw_gaussian(rng, prec, rhs).reshape((r, k), order="F")

        B, kk = _retry(draw_b)
        rejections += kk
        E = Fn - Z @ B.T

        def draw_q():
            Qd = np.atleast_2d(stats.invwishart.rvs(df=q_dof + T - 1, scale=priors.q_scale * np.eye(r) + E.T @ E,
                                                    random_state=rng))
            np.linalg.cholesky(Qd)
            return Qd

        Qd, kk = _retry(draw_q)
        rejections += kk
        d = B[:, 0] if intercept else np.zeros(r)
        Phi = model.Phi.copy()
        Phi[:r, :] = B[:, 1:] if intercept else B
        Lfull = np.zeros((m, n))
        Lfull[:, :r] = L
        model = StateSpaceModel(Phi, Qd, Lfull, sig.copy(), d, model.a0, model.P0)
        # identification: rotate parameters and the current state draw together
        Qm, Rm = np.linalg.qr(L)
        idx = np.argmax(np.abs(Qm), axis=0)
        S = np.sign(Qm[idx, np.arange(r)])
        S[S == 0] = 1.0
        A = S[:, None] * Rm
        model = model.transform(A).replace(a0=a0, P0=P0)
        f = f @ A.T
        if sweep >= burn_in and (sweep - burn_in) % thin == 0:
            out["L"].append(model.loadings.copy())
            out["B"].append(model.Phi[:r].copy())
            out["d"].append(model.intercept.copy())
            out["Q"].append(model.Q.copy())
            out["s"].append(model.sigma_eps.copy())
            out["f"].append(f.copy())
    return PosteriorDraws(np.array(out["L"]), np.array(out["B"]), np.array(out["d"]), np.array(out["Q"]),
                          np.array(out["s"]), np.array(out["f"]), rejections, seed)
