"""Dated multivariate time-series panels: ingestion, monthly aggregation, standardization.

Missing observations are stored as NaN.  Panels are immutable; every operation
returns a new panel.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FREQUENCIES = ("daily", "monthly", "quarterly")


class PanelError(ValueError):
    """Raised for malformed panels or unreadable panel files."""


def _as_dates(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


def infer_frequency(dates: np.ndarray) -> str:
    """Guess the sampling frequency from the median spacing of ``dates``."""
    if len(dates) < 2:
        return "daily"
    gaps = np.diff(dates).astype(np.int64)
    med = float(np.median(gaps))
    if med <= 5:
        return "daily"
    if med <= 45:
        return "monthly"
    return "quarterly"


def _check_spacing(dates: np.ndarray, frequency: str) -> None:
    if len(dates) < 2:
        return
    gaps = np.diff(dates).astype(np.int64)
    lo, hi = {"daily": (1, 10), "monthly": (27, 32), "quarterly": (88, 93)}[frequency]
    if gaps.min() < lo or gaps.max() > hi:
        # gaps spanning missing whole periods are tolerated for monthly/quarterly
        if frequency == "daily" or np.any(gaps < lo):
            raise PanelError(
                f"date spacing {gaps.min()}..{gaps.max()} days inconsistent with {frequency} frequency"
            )


@dataclass(frozen=True)
class TimeSeriesPanel:
    """T x m block of dated observations with NaN for missing cells."""

    dates: np.ndarray
    names: tuple
    values: np.ndarray
    frequency: str = field(default="")

    def __post_init__(self):
        dates = _as_dates(self.dates)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        names = tuple(str(n) for n in self.names)
        if values.ndim != 2:
            raise PanelError("values must be a T x m matrix")
        if len(dates) != values.shape[0]:
            raise PanelError(f"{len(dates)} dates but {values.shape[0]} rows")
        if len(names) != values.shape[1]:
            raise PanelError(f"{len(names)} names but {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise PanelError("series names must be unique")
        if len(dates) > 1 and np.any(np.diff(dates).astype(np.int64) <= 0):
            raise PanelError("dates must be strictly increasing")
        freq = self.frequency or infer_frequency(dates)
        if freq not in FREQUENCIES:
            raise PanelError(f"unknown frequency {freq!r}")
        _check_spacing(dates, freq)
        values.setflags(write=False)
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "frequency", freq)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def select(self, names: Sequence[str]) -> "TimeSeriesPanel":
        idx = [self.names.index(n) for n in names]
        return TimeSeriesPanel(self.dates, tuple(names), self.values[:, idx], self.frequency)

    def with_values(self, values, names=None) -> "TimeSeriesPanel":
        return TimeSeriesPanel(self.dates, self.names if names is None else names, values, self.frequency)

    def slice_rows(self, start: int | None = None, stop: int | None = None) -> "TimeSeriesPanel":
        return TimeSeriesPanel(self.dates[start:stop], self.names, self.values[start:stop], self.frequency)

    def is_complete(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def month_keys(self) -> np.ndarray:
        """Integer year*12+month key per row, used to align panels of different origin."""
        return self.dates.astype("datetime64[M]").astype(np.int64)


def _parse_date(text: str, row: int) -> np.datetime64:
    try:
        return np.datetime64(dt.date.fromisoformat(text.strip()), "D")
    except ValueError:
        raise PanelError(f"row {row}, column 'date': cannot parse date {text!r}") from None


def ingest_csv(path, columns: Sequence[str] | None = None, frequency: str = "") -> TimeSeriesPanel:
    """Read a CSV with a leading ``date`` column into a panel.

    Empty cells become NaN.  Rows are sorted by date; duplicate dates are an
    error.  ``columns`` optionally restricts (and orders) the series read.
    """
    path = Path(path)
    if not path.exists():
        raise PanelError(f"{path}: no such file")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0].lower() != "date":
            raise PanelError(f"{path}: first column must be named 'date'")
        names = header[1:]
        dates, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise PanelError(f"{path}: row {lineno} has {len(rec)} fields, expected {len(header)}")
            dates.append(_parse_date(rec[0], lineno))
            vals = []
            for name, cell in zip(names, rec[1:]):
                cell = cell.strip()
                if cell == "":
                    vals.append(np.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise PanelError(f"row {lineno}, column {name!r}: cannot parse number {cell!r}") from None
            rows.append(vals)
    dates = np.array(dates, dtype="datetime64[D]")
    values = np.array(rows, dtype=float).reshape(len(rows), len(names))
    order = np.argsort(dates, kind="stable")
    dates, values = dates[order], values[order]
    if len(dates) > 1:
        dup = np.flatnonzero(np.diff(dates).astype(np.int64) == 0)
        if dup.size:
            raise PanelError(f"{path}: duplicate date {dates[dup[0]]}")
    panel = TimeSeriesPanel(dates, names, values, frequency)
    if columns is not None:
        panel = panel.select(columns)
    return panel


def write_csv(panel: TimeSeriesPanel, path) -> Path:
    """Write ``panel`` in the ingestion schema; floats use 12 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.names])
        for d, row in zip(panel.dates, panel.values):
            w.writerow([str(d), *("" if not np.isfinite(v) else format(v, ".12g") for v in row)])
    return path


def aggregate_to_monthly(panel: TimeSeriesPanel, method: str = "mean") -> TimeSeriesPanel:
    """Collapse a daily panel to one row per calendar month (dated at month end).

    ``mean`` averages the non-missing days, ``last`` takes the last non-missing
    day.  A month with no observations for a series stays missing.
    """
    if panel.T == 0:
        raise PanelError("cannot aggregate an empty panel")
    if panel.frequency != "daily":
        raise PanelError(f"aggregate_to_monthly expects a daily panel, got {panel.frequency}")
    if method not in ("mean", "last"):
        raise ValueError(f"unknown aggregation method {method!r}")
    months = panel.dates.astype("datetime64[M]")
    uniq, inverse = np.unique(months, return_inverse=True)
    out = np.full((len(uniq), panel.m), np.nan)
    vals = panel.values
    ok = np.isfinite(vals)
    if method == "mean":
        sums = np.zeros((len(uniq), panel.m))
        counts = np.zeros((len(uniq), panel.m))
        np.add.at(sums, inverse, np.where(ok, vals, 0.0))
        np.add.at(counts, inverse, ok)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    else:
        for i in range(len(uniq)):
            block = vals[inverse == i]
            for j in range(panel.m):
                col = block[:, j]
                good = np.flatnonzero(np.isfinite(col))
                if good.size:
                    out[i, j] = col[good[-1]]
    month_end = (uniq + 1).astype("datetime64[D]") - 1
    return TimeSeriesPanel(month_end, panel.names, out, "monthly")


@dataclass(frozen=True)
class StandardizationRecord:
    """Location/scale used by :func:`standardize`.

    For ``window='full'`` ``mean`` and ``std`` have shape (m,); for
    ``'expanding'`` they have shape (T, m) with row t computed from rows 0..t.
    """

    mean: np.ndarray
    std: np.ndarray
    window: str
    names: tuple = ()


def standardize(panel: TimeSeriesPanel, window: str = "full") -> tuple[TimeSeriesPanel, StandardizationRecord]:
    vals = panel.values
    ok = np.isfinite(vals)
    for j, name in enumerate(panel.names):
        col = vals[ok[:, j], j]
        if col.size < 2:
            raise PanelError(f"series {name!r} has fewer than 2 observations")
        if np.ptp(col) == 0:
            raise PanelError(f"series {name!r} has zero variance")
    if window == "full":
        mean = np.nanmean(vals, axis=0)
        std = np.nanstd(vals, axis=0, ddof=1)
    elif window == "expanding":
        filled = np.where(ok, vals, 0.0)
        n = np.cumsum(ok, axis=0)
        s1 = np.cumsum(filled, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = s1 / n
            # sums of squares shifted by the full-sample mean to limit cancellation
            s2 = np.cumsum(np.where(ok, (vals - mean[-1]) ** 2, 0.0), axis=0)
            var = (s2 - n * (mean - mean[-1]) ** 2) / (n - 1)
            std = np.sqrt(np.where(var > 0, var, np.nan))
        std[n < 2] = np.nan
    else:
        raise ValueError(f"unknown standardization window {window!r}")
    z = (vals - mean) / std
    return panel.with_values(z), StandardizationRecord(mean, std, window, panel.names)


def destandardize(panel: TimeSeriesPanel, record: StandardizationRecord) -> TimeSeriesPanel:
    return panel.with_values(panel.values * record.std + record.mean)


def align_monthly(*panels: TimeSeriesPanel) -> list[TimeSeriesPanel]:
    """Restrict monthly panels to their common calendar months."""
    keys = [p.month_keys() for p in panels]
    common = keys[0]
    for k in keys[1:]:
        common = np.intersect1d(common, k)
    out = []
    for p, k in zip(panels, keys):
        idx = np.flatnonzero(np.isin(k, common))
        out.append(TimeSeriesPanel(p.dates[idx], p.names, p.values[idx], p.frequency))
    return out
