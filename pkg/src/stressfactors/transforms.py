"""Stress-indicator transforms and the augmented Dickey-Fuller screen."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

DEFAULT_CMAX_WINDOW = 60
DEFAULT_DECAY = 0.94
DEFAULT_BURN_IN = 20
EWSD_MAX_LOOKBACK = 300
EWSD_MIN_WEIGHT = 1e-6


class TransformError(ValueError):
    pass


def cmax(series, window: int = DEFAULT_CMAX_WINDOW) -> np.ndarray:
    """Drawdown from the trailing ``window``-observation maximum: ``1 - x_t / max(x_{t-W+1..t})``.

    The first ``window - 1`` outputs use truncated windows; see
    :func:`truncated_window_mask`.
    """
    x = np.asarray(series, dtype=float)
    if window < 1:
        raise TransformError("window must be >= 1")
    if x.ndim != 1:
        raise TransformError("cmax expects a 1-d series")
    if x.size == 0:
        return x.copy()
    if not np.all(x > 0):
        bad = int(np.flatnonzero(~(x > 0))[0])
        raise TransformError(f"cmax needs strictly positive values; got {x[bad]!r} at position {bad}")
    # padding with x[0] leaves the max of every truncated window unchanged
    padded = np.concatenate([np.full(window - 1, x[0]), x])
    runmax = np.lib.stride_tricks.sliding_window_view(padded, window).max(axis=1)
    out = 1.0 - x / runmax
    out[x == runmax] = 0.0
    return out


def truncated_window_mask(n: int, window: int = DEFAULT_CMAX_WINDOW) -> np.ndarray:
    """True where :func:`cmax` used fewer than ``window`` observations."""
    mask = np.zeros(n, dtype=bool)
    mask[: max(0, min(n, window - 1))] = True
    return mask


def ewsd_weights(decay: float, max_lookback: int = EWSD_MAX_LOOKBACK, min_weight: float = EWSD_MIN_WEIGHT) -> np.ndarray:
    """Weights ``decay**k`` for lags k = 0, 1, ... down to ``min_weight``, capped at ``max_lookback`` terms."""
    n = min(max_lookback, int(math.floor(math.log(min_weight) / math.log(decay))) + 1)
    return decay ** np.arange(n)


def ewsd(series, decay: float = DEFAULT_DECAY, burn_in: int = DEFAULT_BURN_IN) -> np.ndarray:
    """Exponentially weighted standard deviation of log changes.

    At each date the daily log changes up to that date get weights
    ``decay**(t-s)`` and the dispersion around their weighted mean is scaled by
    the unbiased reliability-weight denominator ``V1 - V2/V1``.  Output has the
    length of ``series``; the first ``burn_in`` positions are NaN.
    """
    if not 0.0 < decay < 1.0:
        raise TransformError(f"decay must lie in (0, 1), got {decay}")
    x = np.asarray(series, dtype=float)
    if np.any(~(x > 0)):
        raise TransformError("ewsd needs strictly positive prices")
    out = np.full(x.shape, np.nan)
    if x.size < 2:
        return out
    r = np.diff(np.log(x))
    w = ewsd_weights(decay)
    n = r.size
    # trailing weighted sums via convolution with the truncated kernel
    s0 = np.convolve(np.ones(n), w)[:n]
    s1 = np.convolve(r, w)[:n]
    s2 = np.convolve(r * r, w)[:n]
    v2 = np.convolve(np.ones(n), w * w)[:n]
    mean = s1 / s0
    num = s2 - s1 * mean
    num = np.maximum(num, 0.0)  # cancellation can leave -eps
    denom = s0 - v2 / s0
    with np.errstate(invalid="ignore", divide="ignore"):
        sd = np.sqrt(num / denom)
    sd[denom <= 0] = np.nan
    out[1:] = sd
    out[: min(x.size, burn_in)] = np.nan
    return out


def corp_spread(corp_yield, govt_yield) -> np.ndarray:
    """Corporate bond yield minus the maturity-matched government yield."""
    a = np.asarray(corp_yield, dtype=float)
    b = np.asarray(govt_yield, dtype=float)
    if a.shape != b.shape:
        raise TransformError(f"length mismatch: {a.shape} vs {b.shape}")
    return a - b


def matched_govt_tenor(max_maturity: float | None, tenors=(5, 10)) -> int:
    """Benchmark tenor for a corporate index whose maturities run up to ``max_maturity`` years.

    Picks the shortest benchmark covering the bucket; all-maturity indices
    (``None``) use the longest.
    """
    tenors = sorted(tenors)
    if max_maturity is None:
        return tenors[-1]
    for t in tenors:
        if t >= max_maturity:
            return t
    return tenors[-1]


# MacKinnon (1994) response-surface coefficients, N = 1, for the tau statistic.
_TAU = {
    "c": dict(
        max=2.74, min=-18.83, star=-1.61,
        small=(2.1659, 1.4412, 0.038269),
        large=(1.7339, 0.93202, -0.12745, -0.010368),
    ),
    "ct": dict(
        max=0.7, min=-16.18, star=-2.89,
        small=(3.2512, 1.6047, 0.049588),
        large=(2.5261, 0.61654, -0.37956, -0.060285),
    ),
}
P_FLOOR, P_CEIL = 0.001, 0.999


def mackinnon_pvalue(stat: float, spec: str = "c") -> float:
    """Unclamped approximate p-value of an ADF t-ratio."""
    c = _TAU[spec]
    if stat > c["max"]:
        return 1.0
    if stat < c["min"]:
        return 0.0
    coef = c["small"] if stat <= c["star"] else c["large"]
    return float(norm.cdf(np.polynomial.polynomial.polyval(stat, coef)))


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    p_value: float
    lags_used: int
    spec: str
    nobs: int
    clamped: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value outside [0, 1]")


def schwert_max_lag(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def _adf_design(x: np.ndarray, lags: int, maxlag: int, spec: str):
    dx = np.diff(x)
    start = maxlag  # common sample across lag candidates
    y = dx[start:]
    n = y.size
    cols = [x[start:-1]]
    cols += [dx[start - i : dx.size - i] for i in range(1, lags + 1)]
    cols.append(np.ones(n))
    if spec == "ct":
        cols.append(np.arange(start + 1, start + 1 + n, dtype=float))
    return y, np.column_stack(cols)


def _ols_t(y, X):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = y.size - X.shape[1]
    rss = resid @ resid
    if rss <= (64 * np.finfo(float).eps) ** 2 * (y @ y):
        # exact fit: the t-ratio diverges
        return math.copysign(math.inf, beta[0]), 0.0
    xtx_inv = np.linalg.inv(X.T @ X)
    return beta[0] / math.sqrt(rss / dof * xtx_inv[0, 0]), rss


def adf_test(series, spec: str = "c", max_lags: int | None = None, lag_rule: str = "bic") -> AdfResult:
    """Augmented Dickey-Fuller test of a unit root against stationarity.

    Regresses ``dx_t`` on ``x_{t-1}``, lagged differences and a constant (plus
    a trend for ``spec='ct'``).  With ``lag_rule='bic'`` the lag order
    minimizing BIC over ``0..max_lags`` is chosen on a common sample and the
    regression is then refitted on all usable observations.  The default
    ``max_lags`` is the Schwert bound ``floor(12 (T/100)^(1/4))``.

    p-values are clamped to [0.001, 0.999]; ``AdfResult.clamped`` flags it.
    """
    if spec not in _TAU:
        raise ValueError(f"spec must be 'c' or 'ct', got {spec!r}")
    if lag_rule not in ("bic", "fixed"):
        raise ValueError(f"lag_rule must be 'bic' or 'fixed', got {lag_rule!r}")
    x = np.asarray(series, dtype=float)
    finite = np.isfinite(x)
    if not finite.all():
        idx = np.flatnonzero(finite)
        if idx.size == 0 or not finite[idx[0] : idx[-1] + 1].all():
            raise TransformError("series has missing interior values")
        x = x[idx[0] : idx[-1] + 1]
    T = x.size
    if max_lags is None:
        max_lags = schwert_max_lag(T)
    if T < max_lags + 10:
        raise TransformError(f"series of length {T} too short for {max_lags} lags")
    if lag_rule == "bic" and max_lags > 0:
        best = None
        for p in range(max_lags + 1):
            y, X = _adf_design(x, p, max_lags, spec)
            _, ssr = _ols_t(y, X)
            n = y.size
            bic = n * math.log(max(ssr, np.finfo(float).tiny) / n) + X.shape[1] * math.log(n)
            if best is None or bic < best[0] - 1e-12:
                best = (bic, p)
        lags = best[1]
    else:
        lags = max_lags
    y, X = _adf_design(x, lags, lags, spec)
    stat, _ = _ols_t(y, X)
    p = mackinnon_pvalue(stat, spec)
    clamped = p < P_FLOOR or p > P_CEIL
    return AdfResult(float(stat), float(min(max(p, P_FLOOR), P_CEIL)), lags, spec, int(y.size), clamped)
