import numpy as np
import pytest

from stressfactors.pipeline import ConfigError, apply_recipe, load_config, parse_recipe, parse_taus
from stressfactors.synth import gen_market_panel


def test_parse_recipe():
    steps = parse_recipe([("a", "cmax(eq_large, 60)"), ("b", "ewsd(fx)"), ("c", "passthrough(govt_5y)")])
    assert [s.op for s in steps] == ["cmax", "ewsd", "passthrough"]
    assert steps[0].args == ("eq_large", "60")


@pytest.mark.parametrize("text", ["cmax eq_large", "garch(fx)", "spread(a)", "cmax()"])
def test_bad_recipe(text):
    with pytest.raises(ConfigError):
        parse_recipe([("x", text)])


def test_apply_recipe_drops_burn_in():
    panel, _ = gen_market_panel(200, seed=1)
    out = apply_recipe(panel, parse_recipe([("v", "ewsd(fx, 0.94)"), ("s", "spread(corp_3_5y, govt_5y)")]))
    assert out.T == 180 and np.isfinite(out.values).all()
    assert np.allclose(out.column("s"), (panel.column("corp_3_5y") - panel.column("govt_5y"))[20:])


def test_parse_taus():
    assert np.allclose(parse_taus("0.05:0.95:0.05"), np.arange(1, 20) * 0.05)
    assert np.allclose(parse_taus("0.1, 0.5, 0.9"), [0.1, 0.5, 0.9])
    with pytest.raises(ConfigError):
        parse_taus("0.5:0.1:0.1")


def test_load_config_resolves_relative_paths(tmp_path):
    for name in ("d.csv", "q.csv", "m.csv"):
        (tmp_path / name).write_text("date,a\n")
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nseed = 1\n[inputs]\ndaily = d.csv\nquarterly = q.csv\nmonthly = m.csv\n"
                   "[transform]\nx = passthrough(a)\n")
    cfg = load_config(ini)
    assert cfg.seed == 1
    assert str(cfg.describe()) and cfg.stochastic


def test_load_config_missing_input(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nseed = 1\n[inputs]\ndaily = missing.csv\n[transform]\nx = passthrough(a)\n")
    with pytest.raises(ConfigError, match="missing.csv"):
        load_config(ini)
