"""Growth-at-risk: quantile regression, density scoring and backtests."""
from .backtest import (DEFAULT_HORIZONS, HorizonResult, QuantileBacktestReport, backtest, evaluate,
                       write_table)
from .quantreg import QuantileFit, QuantRegError, pinball, qr_fit, qr_fit_grid
from .scoring import (DEFAULT_TAUS, DensityForecast, KsVerdict, ScoringError, grid_spacing, ks_uniformity, pit,
                      quantile_ic, quantile_score, qwcrps, weight_function)

__all__ = [
    "DEFAULT_HORIZONS", "DEFAULT_TAUS", "DensityForecast", "HorizonResult", "KsVerdict", "QuantRegError",
    "QuantileBacktestReport", "QuantileFit", "ScoringError", "backtest", "evaluate", "grid_spacing",
    "ks_uniformity", "pinball", "pit", "qr_fit", "qr_fit_grid", "quantile_ic", "quantile_score", "qwcrps",
    "weight_function", "write_table",
]
