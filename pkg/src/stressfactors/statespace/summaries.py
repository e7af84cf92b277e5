from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kalman import _obs


@dataclass(frozen=True)
class ExplainedVariance:
    share: np.ndarray
    cumulative: np.ndarray

    def rows(self):
        for j, (s, c) in enumerate(zip(self.share, self.cumulative), start=1):
            yield j, s, c

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "explained_variance", "cumulative"])
            for j, s, c in self.rows():
                w.writerow([j, f"{s:.3f}", f"{c:.3f}"])
        return path


def explained_variance(estimate, panel) -> ExplainedVariance:
    """Share of total panel variance carried by each ``L_j f_j`` path.

    Factors are listed in decreasing order of share; ``estimate`` is an
    :class:`EstimatedFactorModel` or a ``(factors, loadings)`` pair.
    """
    if isinstance(estimate, tuple):
        f, L = estimate
    else:
        f, L = estimate.factors, estimate.loadings
    share = np.sort(factor_shares(f, L, _obs(panel)))[::-1]
    return ExplainedVariance(share, np.cumsum(share))


def factor_shares(f: np.ndarray, L: np.ndarray, Y: np.ndarray) -> np.ndarray:
    total = np.nansum(np.nanvar(Y, axis=0))
    # summed over series, var(L_j f_j) is var(f_j) * |L_j|^2
    return np.var(f, axis=0) * np.sum(L**2, axis=0) / total


def align_factors(factors, panel) -> np.ndarray:
    """Scale each factor to unit variance and sign it to correlate positively with
    the cross-sectional mean of the standardized panel."""
    f = np.asarray(factors, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    Y = _obs(panel)
    z = (Y - np.nanmean(Y, axis=0)) / np.nanstd(Y, axis=0, ddof=1)
    ref = np.nanmean(z, axis=1)
    fz = (f - f.mean(axis=0)) / f.std(axis=0, ddof=1)
    ok = np.isfinite(ref)
    corr = (fz[ok] * (ref[ok] - ref[ok].mean())[:, None]).sum(axis=0)
    signs = np.where(corr < 0, -1.0, 1.0)
    return fz * signs


def combine_factors(factors, method: str = "mean") -> np.ndarray:
    """Row-wise arithmetic mean of the factor columns."""
    if method != "mean":
        raise ValueError(f"unsupported combination method {method!r}")
    f = np.asarray(factors, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape[1] == 0:
        raise ValueError("need at least one factor to combine")
    return f.mean(axis=1)
