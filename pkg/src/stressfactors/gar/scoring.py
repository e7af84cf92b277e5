"""Density forecasts on a quantile grid and their scores."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .quantreg import QuantileFit

DEFAULT_TAUS = np.round(np.arange(1, 20) * 0.05, 10)
WEIGHTS = ("uniform", "centre", "left")
KS_CRITICAL = 1.36


class ScoringError(ValueError):
    pass


def _check_grid(taus) -> np.ndarray:
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any((taus <= 0) | (taus >= 1)):
        raise ScoringError("quantile levels must lie in (0, 1)")
    if np.any(np.diff(taus) <= 0):
        raise ScoringError("quantile grid must be strictly increasing")
    return taus


@dataclass(frozen=True)
class DensityForecast:
    """Predictive distribution described by quantiles on a fixed grid.

    Quantiles are sorted on construction (monotone rearrangement), so the
    stored values are always nondecreasing in ``tau``.
    """

    taus: np.ndarray
    quantiles: np.ndarray
    origin: object = None
    horizon: int = 0

    def __post_init__(self):
        taus = _check_grid(self.taus)
        q = np.atleast_1d(np.asarray(self.quantiles, dtype=float))
        if q.shape != taus.shape:
            raise ScoringError(f"{q.size} quantiles for {taus.size} levels")
        if not np.all(np.isfinite(q)):
            raise ScoringError("quantiles must be finite")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "quantiles", np.sort(q))


def quantile_score(y, q, tau):
    """``2 (1{y < q} - tau) (q - y)``; nonnegative, zero when ``y == q``."""
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    return 2.0 * ((y < q) - np.asarray(tau, dtype=float)) * (q - y)


def weight_function(taus, weight: str) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if weight == "uniform":
        return np.ones_like(taus)
    if weight == "centre":
        return taus * (1.0 - taus)
    if weight == "left":
        return (1.0 - taus) ** 2
    raise ScoringError(f"unknown weight {weight!r}; expected one of {WEIGHTS}")


def grid_spacing(taus, dtau: float | None = None) -> np.ndarray:
    """Riemann weights: the grid step for equally spaced levels, midpoint widths otherwise.

    A single-level grid has no spacing; ``dtau`` (default 1) is used.
    """
    taus = _check_grid(taus)
    if dtau is not None:
        return np.full(taus.shape, float(dtau))
    if taus.size == 1:
        return np.ones(1)
    return np.gradient(taus)


def qwcrps(forecast: DensityForecast, y: float, weight: str = "uniform", dtau: float | None = None) -> float:
    """Quantile-weighted CRPS: ``sum_j w(tau_j) QS(tau_j) dtau_j``."""
    w = weight_function(forecast.taus, weight)
    qs = quantile_score(y, forecast.quantiles, forecast.taus)
    return float(np.sum(w * qs * grid_spacing(forecast.taus, dtau)))


def quantile_ic(fits: Sequence[QuantileFit]) -> tuple[float, float]:
    """Grid-averaged quantile AIC and BIC.

    Per level, ``AIC = 2n ln(mean loss) + 2p`` and ``BIC = 2n ln(mean loss) + p ln n``.
    """
    if not fits:
        raise ScoringError("no fits supplied")
    n, p = fits[0].n, fits[0].p
    if any(f.n != n or f.p != p for f in fits):
        raise ScoringError("all fits must share n and p")
    losses = np.array([f.mean_loss for f in fits])
    if np.any(losses <= 0):
        raise ScoringError("zero pinball loss (exact interpolation); information criteria undefined")
    core = 2.0 * n * np.log(losses)
    return float(np.mean(core + 2 * p)), float(np.mean(core + p * math.log(n)))


def _tail_slope(dq: float, dtau: float) -> float:
    return math.inf if dq <= 0 else dtau / dq


def pit(forecast: DensityForecast, y: float) -> float:
    """Forecast CDF at ``y``.

    Between grid quantiles the CDF is linear.  Beyond the outer quantiles an
    exponential tail carries the remaining mass, with rate matched to the
    density of the adjacent interior segment.
    """
    taus, q = forecast.taus, forecast.quantiles
    y = float(y)
    if taus.size == 1:
        return float(taus[0]) if y == q[0] else (0.0 if y < q[0] else 1.0)
    if y < q[0]:
        lo = taus[0]
        s = _tail_slope(q[1] - q[0], taus[1] - taus[0])
        val = 0.0 if math.isinf(s) else lo * math.exp(-(q[0] - y) * s / lo)
    elif y > q[-1]:
        hi = 1.0 - taus[-1]
        s = _tail_slope(q[-1] - q[-2], taus[-1] - taus[-2])
        val = 1.0 if math.isinf(s) else 1.0 - hi * math.exp(-(y - q[-1]) * s / hi)
    else:
        # right-continuous on flat stretches
        k = int(np.searchsorted(q, y, side="right")) - 1
        if k >= q.size - 1:
            val = float(taus[-1])
        elif q[k + 1] == q[k]:
            val = float(taus[k])
        else:
            val = float(taus[k] + (taus[k + 1] - taus[k]) * (y - q[k]) / (q[k + 1] - q[k]))
    return min(max(val, 0.0), 1.0)


@dataclass(frozen=True)
class KsVerdict:
    statistic: float
    band: float
    n: int

    @property
    def passed(self) -> bool:
        return self.statistic <= self.band


def ks_uniformity(pits) -> KsVerdict:
    """Kolmogorov-Smirnov distance from U(0,1) against the 5 % band ``1.36/sqrt(n)``."""
    u = np.asarray(pits, dtype=float)
    u = u[np.isfinite(u)]
    if u.size == 0:
        raise ScoringError("no PIT values")
    d = stats.kstest(u, "uniform").statistic
    return KsVerdict(float(d), KS_CRITICAL / math.sqrt(u.size), int(u.size))
