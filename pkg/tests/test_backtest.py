import warnings

import numpy as np
import pytest

from stressfactors.gar import backtest, evaluate, write_table
from stressfactors.gar.backtest import TABLE_METRICS
from stressfactors.synth import gen_gar_data


def test_zero_risk_equals_benchmark():
    y, _, _ = gen_gar_data(150, seed=1)
    a = backtest(y, np.zeros(150), h=1)
    b = backtest(y, None, h=1)
    assert a.qwcrps == b.qwcrps and a.aic == b.aic and a.bic == b.bic
    assert np.array_equal(a.pit, b.pit)


def test_origin_scheme():
    y, x, _ = gen_gar_data(100, seed=2)
    res = backtest(y, x, h=3)
    assert res.origins[0] == 59          # ceil(0.6 * 100) - 1
    assert res.origins[-1] == 96
    assert len(res.origins) == 38 and res.n_params == 3
    assert np.array_equal(res.targets, y[np.array(res.origins) + 3])


def test_risk_index_beats_benchmark_and_placebo():
    wins = 0
    placebo = []
    for s in range(10):
        y, x, _ = gen_gar_data(200, seed=s)
        bench = backtest(y, None, h=1).qwcrps["left"]
        wins += backtest(y, x, h=1).qwcrps["left"] < bench
        shuffled = np.random.default_rng(1000 + s).permutation(x)
        placebo.append(backtest(y, shuffled, h=1).qwcrps["left"] - bench)
    assert wins >= 8
    assert np.median(placebo) >= 0


def test_short_window_skips_with_warning():
    y, x, _ = gen_gar_data(20, seed=3)
    with pytest.warns(RuntimeWarning, match="shorter than 3p"):
        res = backtest(y, np.column_stack([x, x**2, np.sin(np.arange(20))]), h=1, window_frac=0.3)
    assert res.skipped > 0


def test_deterministic_report_and_table(tmp_path):
    y, x, _ = gen_gar_data(120, seed=4)
    r1 = evaluate(y, x, horizons=(1, 3), model="index")
    r2 = evaluate(y, x, horizons=(1, 3), model="index")
    bench = evaluate(y, None, horizons=(1, 3), model="benchmark")
    p1 = write_table([bench, r1], tmp_path / "a.csv").read_text()
    p2 = write_table([bench, r2], tmp_path / "b.csv").read_text()
    assert p1 == p2
    lines = p1.splitlines()
    assert lines[0] == "horizon,metric,benchmark,index"
    assert [ln.split(",")[1] for ln in lines[1:5]] == list(TABLE_METRICS)
    assert len(lines) == 1 + 2 * len(TABLE_METRICS)
    pit_lines = r1.write_pit_csv(tmp_path / "pit.csv", 3).read_text().splitlines()
    assert pit_lines[0] == "origin,realized,pit" and len(pit_lines) == 1 + len(r1.horizons[3].pit)


def test_horizon_out_of_range():
    with pytest.raises(ValueError):
        backtest(np.arange(10.0), h=10)
