"""Monte Carlo option pricing (GBM, Merton, Heston), GARCH forecasting and calibration."""

import types as _types

__version__ = "0.1.0"

from .calibration import (
    MertonCalibration,
    calibrate_heston,
    calibrate_merton,
    heston_variance_loss,
    merton_sse_objective,
)
from .errors import (
    CalibrationError,
    DomainError,
    NumericError,
    ParseError,
    StatusError,
    TransportError,
    ValidationError,
    VollabError,
)
from .estimators import (
    GarchVolatility,
    HestonCalibrator,
    MertonCalibrator,
    MonteCarloPricer,
    forecast_prices,
    price_snapshot,
)
from .garch import (
    GarchParams,
    GarchState,
    annualize_volatility,
    fit_garch,
    forecast_variance,
    garch_filter,
    garch_neg_log_likelihood,
)
from .market_data import (
    OptionChainSnapshot,
    OptionContract,
    PriceHistory,
    ReturnSeries,
    fetch_snapshot,
    load_history,
    load_snapshot,
    log_returns,
    realized_variance,
    save_snapshot,
    time_to_expiry,
)
from .optimize import Bounds, OptimizationResult, minimize_box_constrained, numerical_gradient
from .paths import (
    GbmParams,
    HestonParams,
    MertonJumpParams,
    PathGrid,
    SimulationConfig,
    VarianceGrid,
    correlate,
    heston_mean_variance_path,
    simulate_gbm,
    simulate_heston,
    simulate_merton,
)
from .pricing import PriceEstimate, black_scholes_price, discount, mc_price, merton_series_price, payoff
from .report import ComparisonReport, ErrorSummary

__all__ = sorted(
    name for name, obj in globals().items() if not name.startswith("_") and not isinstance(obj, _types.ModuleType)
)
