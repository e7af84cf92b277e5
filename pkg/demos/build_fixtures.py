"""Regenerate the bundled synthetic fixtures used by ``synthetic.ini``.

    python demos/build_fixtures.py [target_dir]
"""
import sys
from pathlib import Path

from stressfactors.panel import write_csv
from stressfactors.synth import gen_market_panel, gen_mf_gdp

target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/stressfactors/fixtures"
target.mkdir(parents=True, exist_ok=True)

# six years of calendar days, and the matching 72 months
market, _ = gen_market_panel(2191, seed=11, start="2005-01-01")
quarterly, monthly, _ = gen_mf_gdp(72, seed=12, start="2005-01")
write_csv(market, target / "market_daily.csv")
write_csv(quarterly, target / "gdp_quarterly.csv")
write_csv(monthly, target / "indicators_monthly.csv")
print(f"fixtures written to {target}")
