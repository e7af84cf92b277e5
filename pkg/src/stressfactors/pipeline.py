"""Run configuration and the end-to-end pipeline.

Configuration is an INI file (``configparser``).  Relative paths resolve
against the directory of the config file.  Example::

    [run]
    seed = 7
    out = out

    [inputs]
    daily = market.csv
    quarterly = gdp_quarterly.csv
    monthly = indicators.csv

    [transform]
    cmax_large = cmax(eq_large, 60)
    vol_fx = ewsd(fx, 0.94)
    spread_5y = spread(corp_3_5y, govt_5y)

    [factors]
    lags = 1, 2, 3
    level = 0.05
    method = em

    [gdp]
    draws = 1000

    [gar]
    horizons = 1, 3, 6, 12
"""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import re
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .gar import DEFAULT_TAUS, evaluate, write_table
from .gdp import build_mf_model, reconcile_gibbs
from .nsfactor import factor_number_test
from .panel import TimeSeriesPanel, aggregate_to_monthly, align_monthly, ingest_csv, standardize, write_csv
from .statespace import align_factors, combine_factors, em_estimate, explained_variance, ffbs_sample
from .synth import RNG_ALGORITHM
from .transforms import cmax, corp_spread, ewsd

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DATA = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException, code: int):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage, self.code, self.cause = stage, code, exc


# -- transform recipe --------------------------------------------------------

_RECIPE = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class RecipeStep:
    name: str
    op: str
    args: tuple

    def __str__(self):
        return f"{self.name} = {self.op}({', '.join(self.args)})"


_OPS = {"cmax": (1, 2), "ewsd": (1, 2), "spread": (2, 2), "passthrough": (1, 1)}


def parse_recipe(items) -> list[RecipeStep]:
    """Parse ``(name, 'op(arg, ...)')`` pairs."""
    steps = []
    for name, text in items:
        m = _RECIPE.match(text)
        if not m:
            raise ConfigError(f"transform {name!r}: cannot parse {text!r}")
        op = m.group(1)
        args = tuple(a.strip() for a in m.group(2).split(",") if a.strip())
        if op not in _OPS:
            raise ConfigError(f"transform {name!r}: unknown operation {op!r}; expected one of {sorted(_OPS)}")
        lo, hi = _OPS[op]
        if not lo <= len(args) <= hi:
            raise ConfigError(f"transform {name!r}: {op} takes {lo}-{hi} arguments, got {len(args)}")
        steps.append(RecipeStep(name, op, args))
    return steps


def apply_recipe(panel: TimeSeriesPanel, steps) -> TimeSeriesPanel:
    """Evaluate the recipe column by column; leading rows with any gap are dropped."""
    cols = []
    for s in steps:
        col = lambda i: panel.column(s.args[i])  # noqa: E731
        if s.op == "cmax":
            cols.append(cmax(col(0), int(s.args[1]) if len(s.args) > 1 else 60))
        elif s.op == "ewsd":
            cols.append(ewsd(col(0), float(s.args[1]) if len(s.args) > 1 else 0.94))
        elif s.op == "spread":
            cols.append(corp_spread(col(0), col(1)))
        else:
            cols.append(np.array(col(0), dtype=float))
    X = np.column_stack(cols)
    full = np.flatnonzero(np.all(np.isfinite(X), axis=1))
    if full.size == 0:
        raise ValueError("no date has every transformed series")
    start = int(full[0])
    return TimeSeriesPanel(panel.dates[start:], [s.name for s in steps], X[start:], panel.frequency)


# -- configuration -----------------------------------------------------------

def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def parse_taus(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            a, b, c = (float(v) for v in text.split(":"))
            n = int(round((b - a) / c)) + 1
            taus = np.round(a + c * np.arange(max(n, 0)), 10)
        else:
            taus = np.array([float(v) for v in text.split(",") if v.strip()])
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad tau grid {text!r}") from None
    if taus.size == 0 or np.any((taus <= 0) | (taus >= 1)) or np.any(np.diff(taus) <= 0):
        raise ConfigError(f"tau grid {text!r} must be nonempty, increasing and inside (0, 1)")
    return taus


@dataclass
class RunConfig:
    base_dir: Path
    out_dir: Path
    seed: int | None
    daily: Path
    quarterly: Path | None = None
    monthly: Path | None = None
    gdp: Path | None = None
    recipe: list = field(default_factory=list)
    standardize: bool = True
    aggregation: str = "mean"
    lags: tuple = (1, 2, 3, 4, 5)
    level: float = 0.05
    r: int | None = None
    method: str = "em"
    p: int = 1
    max_iter: int = 500
    draws: int = 1000
    burn_in: int = 200
    gdp_draws: int = 1000
    gdp_burn_in: int = 200
    gdp_chains: int = 4
    taus: np.ndarray = field(default_factory=lambda: DEFAULT_TAUS.copy())
    horizons: tuple = (1, 3, 6, 12)
    window: float = 0.6

    @property
    def stochastic(self) -> bool:
        return self.method == "bayes" or self.quarterly is not None

    def validate(self) -> None:
        for label in ("daily", "quarterly", "monthly", "gdp"):
            p = getattr(self, label)
            if p is not None and not p.is_file():
                raise ConfigError(f"input {label!r} not found: {p}")
        if self.quarterly is None and self.gdp is None:
            raise ConfigError("need either [inputs] quarterly (reconcile) or [inputs] gdp (monthly growth)")
        if self.method not in ("em", "bayes"):
            raise ConfigError(f"factors.method must be em or bayes, got {self.method!r}")
        if self.stochastic and self.seed is None:
            raise ConfigError("a seed is required when method=bayes or GDP reconciliation is enabled")
        if not self.recipe:
            raise ConfigError("the [transform] section is empty")
        if not 0 < self.window < 1:
            raise ConfigError("gar.window must lie in (0, 1)")
        if self.aggregation not in ("mean", "last"):
            raise ConfigError("factors.aggregation must be mean or last")

    def describe(self) -> dict:
        """Path-independent summary used in the manifest."""
        d = {k: v for k, v in asdict(self).items() if k not in ("base_dir", "out_dir")}
        for k in ("daily", "quarterly", "monthly", "gdp"):
            if d[k] is not None:
                d[k] = Path(d[k]).name
        d["recipe"] = [str(s) for s in self.recipe]
        d["taus"] = [float(t) for t in self.taus]
        d["lags"], d["horizons"] = list(self.lags), list(self.horizons)
        return d


def load_config(path, seed: int | None = None, out: str | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent.resolve()

    def get(section, key, default=None, conv=str):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key).strip()
        try:
            return conv(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: bad value {raw!r}") from None

    def path_of(key):
        v = get("inputs", key)
        return None if v in (None, "") else (base / v).resolve()

    if not cp.has_option("inputs", "daily"):
        raise ConfigError("[inputs] daily is required")
    bool_conv = lambda v: cp.BOOLEAN_STATES[v.lower()]  # noqa: E731
    r_raw = get("factors", "r", "auto")
    out_dir = Path(out).resolve() if out is not None else base / get("run", "out", "out")
    try:
        cfg = RunConfig(
            base_dir=base,
            out_dir=out_dir,
            seed=seed if seed is not None else get("run", "seed", None, int),
            daily=path_of("daily"),
            quarterly=path_of("quarterly"),
            monthly=path_of("monthly"),
            gdp=path_of("gdp"),
            recipe=parse_recipe(cp.items("transform")) if cp.has_section("transform") else [],
            standardize=get("factors", "standardize", True, bool_conv),
            aggregation=get("factors", "aggregation", "mean"),
            lags=get("factors", "lags", (1, 2, 3, 4, 5), _ints),
            level=get("factors", "level", 0.05, float),
            r=None if r_raw == "auto" else int(r_raw),
            method=get("factors", "method", "em"),
            p=get("factors", "p", 1, int),
            max_iter=get("factors", "max_iter", 500, int),
            draws=get("factors", "draws", 1000, int),
            burn_in=get("factors", "burn_in", 200, int),
            gdp_draws=get("gdp", "draws", 1000, int),
            gdp_burn_in=get("gdp", "burn_in", 200, int),
            gdp_chains=get("gdp", "chains", 4, int),
            taus=get("gar", "taus", DEFAULT_TAUS.copy(), parse_taus),
            horizons=get("gar", "horizons", (1, 3, 6, 12), _ints),
            window=get("gar", "window", 0.6, float),
        )
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
    cfg.validate()
    return cfg


# -- artifacts ---------------------------------------------------------------

def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dump_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _series_csv(dates, columns: dict, path: Path) -> Path:
    panel = TimeSeriesPanel(dates, list(columns), np.column_stack(list(columns.values())), "")
    return write_csv(panel, path)


def _matrix_csv(row_names, col_names, M, path: Path) -> Path:
    lines = [",".join(["series", *col_names])]
    for name, row in zip(row_names, M):
        lines.append(",".join([name, *(format(v, ".12g") for v in row)]))
    path.write_text("\n".join(lines) + "\n")
    return path


def numeric_exit_code(exc: BaseException) -> int:
    from .gar import QuantRegError
    from .gdp import ReconcileError
    from .panel import PanelError
    from .statespace import EMError, KalmanError, SamplerError
    from .transforms import TransformError

    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (KalmanError, EMError, SamplerError, ReconcileError, QuantRegError,
                        np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (PanelError, TransformError, OSError, KeyError, ValueError)):
        return EXIT_DATA
    return EXIT_NUMERIC


@dataclass
class RunResult:
    manifest: Path
    artifacts: list


def run_pipeline(cfg: RunConfig) -> RunResult:
    """Execute ingest, transform, select, estimate, combine, reconcile and backtest.

    Every emitted file is listed with its SHA-256 in ``manifest.json``.  On
    failure all files written by this run are removed and :class:`StageError`
    names the stage.
    """
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    stage = "setup"

    def emit(path: Path) -> Path:
        written.append(path)
        return path

    try:
        stage = "ingest"
        raw = ingest_csv(cfg.daily)

        stage = "transform"
        panel = apply_recipe(raw, cfg.recipe)
        emit(write_csv(panel, out / "transformed.csv"))
        work = standardize(panel)[0] if cfg.standardize else panel

        stage = "select"
        complete = np.all(np.isfinite(work.values), axis=1)
        r_test, table = factor_number_test(work.values[complete], cfg.lags, cfg.level)
        emit(table.to_csv(out / "factor_number_table.csv"))
        r = cfg.r if cfg.r is not None else r_test
        r = min(max(r, 1), work.m - 1)

        stage = "estimate"
        if cfg.method == "em":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                est = em_estimate(work, r, cfg.p, max_iter=cfg.max_iter)
            factors, loadings = est.factors, est.loadings
            diag = dict(method="em", loglik_trace=[float(v) for v in est.loglik_trace], converged=est.converged,
                        n_iter=est.n_iter, status=est.status, adf_pvalues=[float(v) for v in est.adf_pvalues],
                        stationary=[bool(v) for v in est.stationary])
        else:
            draws = ffbs_sample(work, r, cfg.p, n_draws=cfg.draws, seed=cfg.seed, burn_in=cfg.burn_in)
            factors, loadings = draws.factor_mean, draws.loadings.mean(axis=0)
            diag = dict(method="bayes", draws=cfg.draws, burn_in=cfg.burn_in, rejections=draws.rejections)
        ev = explained_variance((factors, loadings), work)
        diag.update(r=int(r), r_selected=int(r_test), explained_variance=[float(v) for v in ev.share],
                    cumulative=[float(v) for v in ev.cumulative])
        fnames = [f"f{j + 1}" for j in range(r)]
        emit(_series_csv(work.dates, dict(zip(fnames, factors.T)), out / "factors.csv"))
        emit(_matrix_csv(work.names, fnames, loadings, out / "loadings.csv"))
        emit(_dump_json(diag, out / "diagnostics.json"))

        stage = "combine"
        aligned = align_factors(factors, work)
        combined = combine_factors(aligned)
        daily_idx = TimeSeriesPanel(work.dates, fnames + ["combined"], np.column_stack([aligned, combined]),
                                    work.frequency)
        monthly_idx = aggregate_to_monthly(daily_idx, cfg.aggregation) if work.frequency == "daily" else daily_idx
        emit(write_csv(monthly_idx, out / "stress_index_monthly.csv"))

        stage = "reconcile"
        if cfg.quarterly is not None:
            quarterly = ingest_csv(cfg.quarterly)
            monthly = ingest_csv(cfg.monthly) if cfg.monthly is not None else None
            dates = None if monthly is not None else monthly_idx.dates
            model = build_mf_model(quarterly, monthly, dates=dates)
            post = reconcile_gibbs(model, cfg.gdp_draws, cfg.gdp_burn_in, seed=cfg.seed, chains=cfg.gdp_chains)
            emit(post.to_csv(out / "gdp_monthly.csv"))
            gdp = post.to_panel("gdp")
        else:
            gdp = ingest_csv(cfg.gdp)
            gdp = TimeSeriesPanel(gdp.dates, ["gdp"], gdp.values[:, :1], "monthly")

        stage = "backtest"
        g, idx = align_monthly(gdp, monthly_idx)
        y = g.values[:, 0]
        dates = [str(d) for d in g.dates]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            reports = [evaluate(y, None, cfg.horizons, cfg.taus, cfg.window, dates, "benchmark"),
                       evaluate(y, idx.column("combined"), cfg.horizons, cfg.taus, cfg.window, dates, "combined")]
        emit(write_table(reports, out / "gar_table.csv"))
        lines = ["model,horizon,origin,realized,pit"]
        for rep in reports:
            for h, res in rep.horizons.items():
                for o, yv, u in zip(res.origins, res.targets, res.pit):
                    lines.append(f"{rep.model},{h},{o},{format(yv, '.12g')},{format(u, '.12g')}")
        emit(out / "gar_pit.csv").write_text("\n".join(lines) + "\n")

        stage = "manifest"
        manifest = dict(
            package_version=__version__,
            rng=RNG_ALGORITHM,
            seed=cfg.seed,
            config=cfg.describe(),
            artifacts=[dict(path=p.name, sha256=sha256_of(p), bytes=p.stat().st_size) for p in written],
        )
        mpath = _dump_json(manifest, out / "manifest.json")
    except Exception as exc:
        for p in written:
            p.unlink(missing_ok=True)
        (out / "manifest.json").unlink(missing_ok=True)
        log.error("stage %s failed: %s", stage, exc)
        raise StageError(stage, exc, numeric_exit_code(exc)) from exc
    log.info("wrote %d artifacts to %s", len(written), out)
    return RunResult(mpath, written)
