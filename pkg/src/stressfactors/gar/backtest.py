"""Expanding-window growth-at-risk backtest."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..panel import TimeSeriesPanel
from .quantreg import qr_fit_grid
from .scoring import DEFAULT_TAUS, WEIGHTS, DensityForecast, KsVerdict, ks_uniformity, pit, quantile_ic, qwcrps

DEFAULT_HORIZONS = (1, 3, 6, 12)
TABLE_METRICS = ("AIC", "BIC", "w_centre", "w_left")


@dataclass
class HorizonResult:
    horizon: int
    qwcrps: dict              # weight name -> mean score over origins
    aic: float
    bic: float
    pit: np.ndarray
    ks: KsVerdict
    origins: list             # forecast-origin labels (dates or indices)
    targets: np.ndarray       # realized y_{t+h}
    forecasts: list = field(repr=False, default_factory=list)
    n_params: int = 0
    skipped: int = 0

    def metric(self, name: str) -> float:
        if name == "AIC":
            return self.aic
        if name == "BIC":
            return self.bic
        if name.startswith("w_"):
            return self.qwcrps[name[2:]]
        raise KeyError(name)


@dataclass
class QuantileBacktestReport:
    model: str
    taus: np.ndarray
    horizons: dict            # h -> HorizonResult
    window_frac: float = 0.6

    def write_pit_csv(self, path, h: int) -> Path:
        res = self.horizons[h]
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["origin", "realized", "pit"])
            for o, yv, u in zip(res.origins, res.targets, res.pit):
                w.writerow([o, format(yv, ".12g"), format(u, ".12g")])
        return path


def write_table(reports, path) -> Path:
    """CSV with one row per (horizon, metric) and one column per model, three decimals."""
    reports = list(reports)
    hs = sorted(set().union(*(r.horizons for r in reports)))
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["horizon", "metric"] + [r.model for r in reports])
        for h in hs:
            for name in TABLE_METRICS:
                row = [h, name]
                for r in reports:
                    row.append(f"{r.horizons[h].metric(name):.3f}" if h in r.horizons else "")
                w.writerow(row)
    return path


def _risk_matrix(risk, T):
    if risk is None:
        return np.zeros((T, 0))
    R = risk.values if isinstance(risk, TimeSeriesPanel) else np.asarray(risk, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    if R.shape[0] != T:
        raise ValueError(f"risk regressors have {R.shape[0]} rows, GDP has {T}")
    return R


def _usable_columns(X):
    """Intercept plus non-constant columns that keep the design full rank."""
    keep = [0]
    for j in range(1, X.shape[1]):
        col = X[:, j]
        if np.ptp(col) == 0:
            continue
        trial = keep + [j]
        if np.linalg.matrix_rank(X[:, trial]) == len(trial):
            keep = trial
    return keep


def _design(y, R):
    return np.column_stack([np.ones(y.size), y, R])


def backtest(y, risk=None, h: int = 1, taus=DEFAULT_TAUS, window_frac: float = 0.6,
             dates=None) -> HorizonResult:
    """Direct h-step quantile forecasts of ``y`` from ``(1, y_t, risk_t)``.

    The first origin leaves ``window_frac`` of the sample for estimation; the
    window then expands by one month per origin.  Regressors that are constant
    on a window are dropped, so an all-zero risk series reproduces the
    lag-only benchmark.
    """
    y = np.asarray(y, dtype=float)
    T = y.size
    if h < 1 or h >= T:
        raise ValueError(f"horizon {h} outside [1, {T - 1}]")
    taus = np.asarray(taus, dtype=float)
    X = _design(y, _risk_matrix(risk, T))
    ok = np.all(np.isfinite(X), axis=1)
    ok[: T - h] &= np.isfinite(y[h:])
    ok[T - h :] = False
    labels = list(dates) if dates is not None else list(range(T))

    pairs = np.flatnonzero(ok)
    cols = _usable_columns(X[pairs])
    fits = qr_fit_grid(y[pairs + h], X[np.ix_(pairs, cols)], taus)
    aic, bic = quantile_ic(fits)

    first = max(int(math.ceil(window_frac * T)) - 1, 0)
    scores = {wt: [] for wt in WEIGHTS}
    pits, origins, targets, forecasts = [], [], [], []
    skipped = 0
    for o in range(first, T - h):
        if not ok[o]:
            continue
        train = pairs[pairs + h <= o]
        Xt = X[train]
        use = _usable_columns(Xt)
        p = len(use)
        if train.size < 3 * p:
            warnings.warn(f"origin {labels[o]}: window of {train.size} is shorter than 3p={3 * p}; skipped",
                          RuntimeWarning)
            skipped += 1
            continue
        ofits = qr_fit_grid(y[train + h], Xt[:, use], taus)
        q = np.array([f.predict(X[o, use]) for f in ofits])
        fc = DensityForecast(taus, q, labels[o], h)
        target = y[o + h]
        for wt in WEIGHTS:
            scores[wt].append(qwcrps(fc, target, wt))
        pits.append(pit(fc, target))
        origins.append(labels[o])
        targets.append(target)
        forecasts.append(fc)
    if not origins:
        raise ValueError(f"no usable forecast origins at horizon {h}")
    pits = np.array(pits)
    return HorizonResult(h, {wt: float(np.mean(v)) for wt, v in scores.items()}, aic, bic, pits,
                         ks_uniformity(pits), origins, np.array(targets), forecasts, len(cols), skipped)


def evaluate(y, risk=None, horizons=DEFAULT_HORIZONS, taus=DEFAULT_TAUS, window_frac: float = 0.6,
             dates=None, model: str = "model") -> QuantileBacktestReport:
    """Run :func:`backtest` at each horizon and collect the results."""
    res = {int(h): backtest(y, risk, int(h), taus, window_frac, dates) for h in horizons}
    return QuantileBacktestReport(model, np.asarray(taus, dtype=float), res, window_frac)
