"""Command-line interface: ``stressfactors <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 data error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .pipeline import (EXIT_CONFIG, EXIT_OK, ConfigError, StageError, _matrix_csv, _series_csv, apply_recipe,
                       load_config, numeric_exit_code, parse_recipe, parse_taus, run_pipeline)

log = logging.getLogger("stressfactors")


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _out(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _monthly(panel, method="mean"):
    from .panel import aggregate_to_monthly
    return aggregate_to_monthly(panel, method) if panel.frequency == "daily" else panel


# -- commands ------------------------------------------------------------------

def cmd_ingest(args):
    from .panel import ingest_csv, write_csv
    cols = args.columns.split(",") if args.columns else None
    panel = ingest_csv(args.input, cols)
    if args.monthly:
        panel = _monthly(panel, args.monthly)
    path = write_csv(panel, _out(args) / args.name)
    print(f"{panel.T} rows x {panel.m} series ({panel.frequency}) -> {path}")


def cmd_transform(args):
    from .panel import ingest_csv, write_csv
    if args.recipe:
        items = []
        for text in args.recipe:
            name, _, expr = text.partition("=")
            items.append((name.strip(), expr.strip()))
        steps = parse_recipe(items)
    elif args.config:
        steps = load_config(args.config, seed=args.seed).recipe
    else:
        raise ConfigError("give --recipe NAME=OP(...) at least once, or --config")
    panel = apply_recipe(ingest_csv(args.input), steps)
    path = write_csv(panel, _out(args) / "transformed.csv")
    print(f"{panel.m} transformed series, {panel.T} rows -> {path}")


def cmd_adf(args):
    from .panel import ingest_csv
    from .transforms import adf_test
    panel = ingest_csv(args.input)
    path = _out(args) / "adf.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "statistic", "p_value", "lags_used", "spec", "nobs", "p_clamped"])
        for name in panel.names:
            res = adf_test(panel.column(name), args.spec, args.max_lags, args.lag_rule)
            w.writerow([name, f"{res.statistic:.6f}", f"{res.p_value:.6f}", res.lags_used, res.spec, res.nobs,
                        int(res.clamped)])
            print(f"{name:20s} stat {res.statistic:9.4f}  p {res.p_value:.4f}  lags {res.lags_used}")
    print(f"-> {path}")


def _factor_input(args):
    from .panel import ingest_csv, standardize
    panel = ingest_csv(args.input)
    return standardize(panel)[0] if not args.raw else panel


def cmd_factors_select(args):
    from .nsfactor import factor_number_test
    panel = _factor_input(args)
    X = panel.values[np.all(np.isfinite(panel.values), axis=1)]
    r, table = factor_number_test(X, _ints(args.lags), args.level)
    path = table.to_csv(_out(args) / "factor_number_table.csv")
    print(f"selected r = {r} -> {path}")


def cmd_factors_estimate(args):
    from .statespace import em_estimate, explained_variance, ffbs_sample
    panel = _factor_input(args)
    out = _out(args)
    if args.method == "bayes":
        if args.seed is None:
            raise ConfigError("--seed is required with --method bayes")
        draws = ffbs_sample(panel, args.r, args.p, n_draws=args.draws, seed=args.seed, burn_in=args.burn_in)
        f, L = draws.factor_mean, draws.loadings.mean(axis=0)
        diag = dict(method="bayes", draws=args.draws, rejections=draws.rejections)
    else:
        est = em_estimate(panel, args.r, args.p, max_iter=args.max_iter)
        f, L = est.factors, est.loadings
        diag = dict(method="em", loglik_trace=[float(v) for v in est.loglik_trace], converged=est.converged,
                    status=est.status, stationary=[bool(v) for v in est.stationary],
                    adf_pvalues=[float(v) for v in est.adf_pvalues])
    ev = explained_variance((f, L), panel)
    diag.update(explained_variance=[float(v) for v in ev.share], cumulative=[float(v) for v in ev.cumulative])
    names = [f"f{j + 1}" for j in range(args.r)]
    _series_csv(panel.dates, dict(zip(names, f.T)), out / "factors.csv")
    _matrix_csv(panel.names, names, L, out / "loadings.csv")
    (out / "diagnostics.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n")
    print(f"{args.r} factor(s) by {args.method} -> {out}")


def cmd_factors_combine(args):
    from .panel import TimeSeriesPanel, ingest_csv, write_csv
    from .statespace import align_factors, combine_factors
    factors = ingest_csv(args.input)
    ref = ingest_csv(args.panel) if args.panel else None
    if ref is not None:
        idx = np.isin(ref.dates, factors.dates)
        if idx.sum() != factors.T:
            raise ValueError("factor dates are not all present in the reference panel")
        f = align_factors(factors.values, ref.values[idx])
    else:
        f = factors.values
    combined = combine_factors(f)
    panel = TimeSeriesPanel(factors.dates, ["combined"], combined[:, None], factors.frequency)
    if args.monthly:
        panel = _monthly(panel, args.monthly)
    path = write_csv(panel, _out(args) / "combined.csv")
    print(f"combined {factors.m} factor(s) -> {path}")


def cmd_gdp_reconcile(args):
    from .gdp import build_mf_model, reconcile_gibbs
    from .panel import ingest_csv
    if args.seed is None:
        raise ConfigError("--seed is required for reconciliation")
    q = ingest_csv(args.quarterly)
    m = ingest_csv(args.monthly)
    model = build_mf_model(q, m, unemployment=args.unemployment or None)
    post = reconcile_gibbs(model, args.draws, args.burn_in, seed=args.seed, chains=args.chains)
    path = post.to_csv(_out(args) / "gdp_monthly.csv")
    acc = ", ".join(f"{k} {v:.3f}" for k, v in sorted(post.acceptance.items()))
    print(f"{post.n_draws} draws over {post.chains} chain(s); acceptance {acc} -> {path}")


def cmd_gar_evaluate(args):
    from .gar import evaluate, write_table
    from .panel import TimeSeriesPanel, align_monthly, ingest_csv
    gdp = _monthly(ingest_csv(args.gdp))
    col = args.gdp_column if args.gdp_column in gdp.names else gdp.names[0]
    gdp = TimeSeriesPanel(gdp.dates, ["gdp"], gdp.column(col)[:, None], "monthly")
    horizons = _ints(args.horizons)
    taus = parse_taus(args.taus)
    out = _out(args)
    reports = []
    with warnings.catch_warnings():
        if not args.verbose:
            warnings.simplefilter("ignore", RuntimeWarning)
        indexes = [_monthly(ingest_csv(path)) for path in args.index]
        # every model, the benchmark included, is scored on the common sample
        g, *indexes = align_monthly(gdp, *indexes)
        y = g.values[:, 0]
        dates = [str(d) for d in g.dates]
        reports.append(evaluate(y, None, horizons, taus, args.window, dates, "benchmark"))
        for path, idx in zip(args.index, indexes):
            reports.append(evaluate(y, idx.values, horizons, taus, args.window, dates, Path(path).stem))
    table = write_table(reports, out / "gar_table.csv")
    for rep in reports:
        for h in rep.horizons:
            rep.write_pit_csv(out / f"pit_{rep.model}_h{h}.csv", h)
    print(f"{len(reports)} model(s) x {len(horizons)} horizon(s) -> {table}")


def cmd_synth(args):
    from .panel import write_csv
    from .synth import FactorDgpSpec, gen_factor_panel, gen_market_panel, gen_mf_gdp
    out = _out(args)
    seed = 0 if args.seed is None else args.seed
    if args.kind == "factor-panel":
        spec = FactorDgpSpec(m=args.m, r1=args.r1, r2=args.r2, T=args.T, seed=seed, noise_scale=args.noise)
        panel, truth = gen_factor_panel(spec)
        write_csv(panel, out / "factor_panel.csv")
        _series_csv(panel.dates, {f"f{j + 1}": truth.factors[:, j] for j in range(truth.factors.shape[1])},
                    out / "factor_truth.csv")
        _matrix_csv(panel.names, [f"f{j + 1}" for j in range(truth.loadings.shape[1])], truth.loadings,
                    out / "loadings_truth.csv")
    elif args.kind == "mf-gdp":
        q, m, truth = gen_mf_gdp(args.months, seed=seed, start=args.start)
        write_csv(q, out / "gdp_quarterly.csv")
        write_csv(m, out / "indicators_monthly.csv")
        _series_csv(m.dates, {"gdp_true": truth.monthly_growth}, out / "gdp_truth.csv")
    else:
        panel, s = gen_market_panel(args.T, seed=seed)
        write_csv(panel, out / "market_daily.csv")
        _series_csv(panel.dates, {"stress": s}, out / "stress_truth.csv")
    print(f"synthetic {args.kind} (seed {seed}) -> {out}")


def cmd_run(args):
    if not args.config:
        raise ConfigError("run needs --config")
    cfg = load_config(args.config, seed=args.seed, out=args.out)
    res = run_pipeline(cfg)
    print(f"{len(res.artifacts)} artifacts; manifest {res.manifest}")


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="output directory (default: current directory, or [run] out)")
    common.add_argument("--seed", type=int, help="random seed for stochastic stages")
    common.add_argument("--verbose", "-v", action="store_true", help="log progress and warnings")

    p = argparse.ArgumentParser(prog="stressfactors", parents=[common],
                                description="Financial stress factors and growth-at-risk evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="validate a CSV panel and re-emit it")
    s.add_argument("--input", required=True)
    s.add_argument("--columns", help="comma-separated subset")
    s.add_argument("--monthly", choices=("mean", "last"), help="aggregate a daily panel to months")
    s.add_argument("--name", default="ingested.csv")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("transform", parents=[common], help="apply a transform recipe")
    s.add_argument("--input", required=True)
    s.add_argument("--recipe", action="append", metavar="NAME=OP(ARGS)",
                   help="e.g. cmax_ftse='cmax(ftse, 60)'; repeatable. Default: [transform] of --config")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("adf", parents=[common], help="augmented Dickey-Fuller test per series")
    s.add_argument("--input", required=True)
    s.add_argument("--spec", choices=("c", "ct"), default="c")
    s.add_argument("--max-lags", type=int)
    s.add_argument("--lag-rule", choices=("bic", "fixed"), default="bic")
    s.set_defaults(func=cmd_adf)

    f = sub.add_parser("factors", parents=[common], help="factor number test, estimation, combination")
    fsub = f.add_subparsers(dest="action", required=True)
    for name, func in (("select", cmd_factors_select), ("estimate", cmd_factors_estimate)):
        s = fsub.add_parser(name, parents=[common])
        s.add_argument("--input", required=True)
        s.add_argument("--raw", action="store_true", help="skip standardization")
        s.set_defaults(func=func)
        if name == "select":
            s.add_argument("--lags", default="1,2,3,4,5")
            s.add_argument("--level", type=float, default=0.05)
        else:
            s.add_argument("--r", type=int, required=True)
            s.add_argument("--method", choices=("em", "bayes"), default="em")
            s.add_argument("--p", type=int, default=1)
            s.add_argument("--draws", type=int, default=1000)
            s.add_argument("--burn-in", type=int, default=200)
            s.add_argument("--max-iter", type=int, default=500)
    s = fsub.add_parser("combine", parents=[common])
    s.add_argument("--input", required=True, help="factor paths CSV")
    s.add_argument("--panel", help="panel used to sign-align the factors")
    s.add_argument("--monthly", choices=("mean", "last"))
    s.set_defaults(func=cmd_factors_combine)

    g = sub.add_parser("gdp", parents=[common], help="monthly GDP reconciliation")
    gsub = g.add_subparsers(dest="action", required=True)
    s = gsub.add_parser("reconcile", parents=[common])
    s.add_argument("--quarterly", required=True)
    s.add_argument("--monthly", required=True)
    s.add_argument("--unemployment", default="U", help="unemployment column ('' for none)")
    s.add_argument("--draws", type=int, default=5000)
    s.add_argument("--burn-in", type=int, default=1000)
    s.add_argument("--chains", type=int, default=4)
    s.set_defaults(func=cmd_gdp_reconcile)

    g = sub.add_parser("gar", parents=[common], help="growth-at-risk backtest")
    gsub = g.add_subparsers(dest="action", required=True)
    s = gsub.add_parser("evaluate", parents=[common])
    s.add_argument("--gdp", required=True)
    s.add_argument("--gdp-column", default="mean")
    s.add_argument("--index", action="append", default=[], required=True)
    s.add_argument("--horizons", default="1,3,6,12")
    s.add_argument("--taus", default="0.05:0.95:0.05")
    s.add_argument("--window", type=float, default=0.6)
    s.set_defaults(func=cmd_gar_evaluate)

    s = sub.add_parser("synth", parents=[common], help="synthetic data sets with known truth")
    ssub = s.add_subparsers(dest="kind", required=True)
    k = ssub.add_parser("factor-panel", parents=[common])
    k.add_argument("--m", type=int, default=9)
    k.add_argument("--r1", type=int, default=2)
    k.add_argument("--r2", type=int, default=1)
    k.add_argument("--T", type=int, default=1000)
    k.add_argument("--noise", type=float, default=0.5)
    k = ssub.add_parser("mf-gdp", parents=[common])
    k.add_argument("--months", type=int, default=360)
    k.add_argument("--start", default="2000-01")
    k = ssub.add_parser("market-panel", parents=[common])
    k.add_argument("--T", type=int, default=2191)
    for k in ssub.choices.values():
        k.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", parents=[common], help="full pipeline from a config file")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # mapped to numeric/data exit codes
        code = numeric_exit_code(exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
