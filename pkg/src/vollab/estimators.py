"""scikit-learn style front ends for the pricing and calibration pipelines.

The estimators follow the usual contract: hyper-parameters are set in
``__init__`` and exposed through ``get_params``/``set_params``; ``fit``
returns ``self`` and stores learned state in trailing-underscore attributes;
``predict`` reads that state.
"""

import datetime as dt
import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .calibration import (
    HESTON_BOUNDS,
    MERTON_BOUNDS,
    MERTON_INIT,
    MertonCalibration,
    calibrate_heston,
    calibrate_merton,
    contract_price,
)
from .errors import DomainError
from .garch import (
    TRADING_DAYS,
    annualize_volatility,
    fit_garch,
    forecast_variance,
    garch_state,
    sample_second_moment,
)
from .market_data import DEFAULT_VARIANCE_WINDOW, PriceHistory, log_returns
from .paths import (
    GbmParams,
    HestonParams,
    MertonJumpParams,
    SimulationConfig,
    simulate_gbm,
    simulate_heston,
    simulate_merton,
)
from .pricing import PriceEstimate, payoff
from .validation import check_count, check_series

MODELS = ("gbm", "merton", "heston")


def _as_returns(X):
    if isinstance(X, PriceHistory):
        X = log_returns(X)
    return check_series(X, "returns")


def price_snapshot(snapshot, model, params=None, sim=None, day_count="ACT/365", n_workers=1):
    """Monte Carlo estimates for every contract of ``snapshot``.

    ``gbm`` uses ``params.sigma`` when given, otherwise each contract's implied
    volatility.  ``merton`` takes jump parameters from ``params`` and the
    diffusion volatility from each contract.  ``heston`` needs full
    :class:`HestonParams`.
    """
    sim = sim or SimulationConfig()
    out = []
    for c in snapshot.contracts:
        if model == "gbm":
            sigma = c.implied_volatility if params is None else params.sigma
            fn, p = simulate_gbm, GbmParams(sigma)
        elif model == "merton":
            if params is None:
                raise DomainError("merton pricing needs jump parameters")
            compensated = getattr(params, "compensated", True)
            fn = simulate_merton
            p = MertonJumpParams(c.implied_volatility, params.lambda_j, params.mu_j, params.sigma_j, compensated)
        elif model == "heston":
            if not isinstance(params, HestonParams):
                raise DomainError("heston pricing needs HestonParams")
            fn, p = simulate_heston, params
        else:
            raise DomainError(f"unknown model {model!r}; expected one of {MODELS}")
        out.append(contract_price(fn, snapshot.spot, p, c, snapshot, sim, day_count, n_workers))
    return out


def forecast_prices(snapshot, returns, days, sim=None, day_count="ACT/365", n_workers=1, garch=None):
    """Option prices on each of the next ``days`` calendar days from a GARCH forecast.

    The day-``h`` price uses the annualized ``h``-step variance forecast as the
    GBM volatility and the expiry remaining from ``as_of + h`` days.  Returns
    ``(dates, prices, vols)`` with ``prices`` shaped ``(n_contracts, days)``.
    """
    days = check_count(days, "days")
    sim = sim or SimulationConfig()
    model = garch if garch is not None else GarchVolatility().fit(returns)
    vols = model.annualized_volatility(days)
    dates = [snapshot.as_of + dt.timedelta(days=h) for h in range(1, days + 1)]
    prices = np.empty((len(snapshot.contracts), days))
    for j, (day, vol) in enumerate(zip(dates, vols)):
        for i, c in enumerate(snapshot.contracts):
            if c.expiration < day:
                prices[i, j] = float(payoff(snapshot.spot, c.strike, c.option_type))
                continue
            # same spot, priced as if quoted on ``day``
            est = contract_price(simulate_gbm, snapshot.spot, GbmParams(vol), c, snapshot, sim,
                                 day_count, n_workers, as_of=day)
            prices[i, j] = est.price
    return dates, prices, vols


class GarchVolatility(BaseEstimator):
    """GARCH(1,1) volatility model.

    ``fit`` takes log returns (array, :class:`ReturnSeries`) or a
    :class:`PriceHistory`; ``predict(horizon)`` returns per-period variance
    forecasts for steps ``1..horizon``.
    """

    def __init__(self, max_iter=500, grad_tol=1e-6, periods_per_year=TRADING_DAYS):
        self.max_iter = max_iter
        self.grad_tol = grad_tol
        self.periods_per_year = periods_per_year

    def fit(self, X, y=None):
        r = _as_returns(X)
        self.params_, self.result_ = fit_garch(
            r, max_iter=self.max_iter, grad_tol=self.grad_tol, return_result=True
        )
        self.initial_variance_ = sample_second_moment(r)
        self.state_ = garch_state(self.params_, r, self.initial_variance_)
        self.n_observations_ = r.size
        return self

    def predict(self, horizon=1):
        check_is_fitted(self, "params_")
        return forecast_variance(self.params_, self.state_, horizon)

    def annualized_volatility(self, horizon=1):
        return annualize_volatility(np.sqrt(self.predict(horizon)), self.periods_per_year)


class MonteCarloPricer(BaseEstimator):
    """Price every contract of a snapshot under one model.

    Stateless: ``fit`` only validates the configuration.  ``model_params`` is a
    :class:`GbmParams` (or ``None`` for per-contract implied volatility),
    jump parameters for ``merton``, or :class:`HestonParams`.
    """

    def __init__(self, model="gbm", model_params=None, n_paths=10_000, n_steps=100, seed=0,
                 day_count="ACT/365", n_workers=1):
        self.model = model
        self.model_params = model_params
        self.n_paths = n_paths
        self.n_steps = n_steps
        self.seed = seed
        self.day_count = day_count
        self.n_workers = n_workers

    def _sim(self):
        return SimulationConfig(self.n_paths, self.n_steps, 1.0, self.seed)

    def fit(self, X=None, y=None):
        if self.model not in MODELS:
            raise DomainError(f"unknown model {self.model!r}")
        self._sim()
        self.fitted_ = True
        return self

    def predict_estimates(self, snapshot):
        return price_snapshot(snapshot, self.model, self.model_params, self._sim(),
                              self.day_count, self.n_workers)

    def predict(self, snapshot):
        return np.array([e.price for e in self.predict_estimates(snapshot)])

    def score(self, snapshot, y=None):
        """Negative mean absolute error against market prices (higher is better)."""
        market = snapshot.market_prices if y is None else np.asarray(y, dtype=float)
        return -float(np.mean(np.abs(self.predict(snapshot) - market)))


class MertonCalibrator(BaseEstimator):
    """Calibrate Merton jump parameters to a snapshot and price with them."""

    def __init__(self, init=MERTON_INIT, bounds=MERTON_BOUNDS, n_paths=10_000, n_steps=100, seed=0,
                 compensated=True, max_iter=100, day_count="ACT/365", n_workers=1):
        self.init = init
        self.bounds = bounds
        self.n_paths = n_paths
        self.n_steps = n_steps
        self.seed = seed
        self.compensated = compensated
        self.max_iter = max_iter
        self.day_count = day_count
        self.n_workers = n_workers

    def _sim(self):
        return SimulationConfig(self.n_paths, self.n_steps, 1.0, self.seed)

    def fit(self, snapshot, y=None):
        self.calibration_ = calibrate_merton(
            snapshot, init=self.init, bounds=self.bounds, sim=self._sim(),
            compensated=self.compensated, day_count=self.day_count,
            max_iter=self.max_iter, n_workers=self.n_workers,
        )
        self.result_ = self.calibration_.result
        self.objective_ = self.calibration_.objective
        return self

    @property
    def jump_params_(self):
        check_is_fitted(self, "calibration_")
        return self.calibration_.jump_vector

    def predict(self, snapshot):
        check_is_fitted(self, "calibration_")
        est = price_snapshot(snapshot, "merton", self.calibration_, self._sim(), self.day_count, self.n_workers)
        return np.array([e.price for e in est])


class HestonCalibrator(BaseEstimator):
    """Calibrate Heston parameters from history plus implied volatility."""

    def __init__(self, window=DEFAULT_VARIANCE_WINDOW, init=None, bounds=HESTON_BOUNDS,
                 n_paths=10_000, n_steps=1000, seed=0, day_count="ACT/365", n_workers=1):
        self.window = window
        self.init = init
        self.bounds = bounds
        self.n_paths = n_paths
        self.n_steps = n_steps
        self.seed = seed
        self.day_count = day_count
        self.n_workers = n_workers

    def fit(self, history, y=None, implied_volatility=None):
        """``implied_volatility`` (or ``y``) sets ``v0 = iv**2``."""
        iv = implied_volatility if implied_volatility is not None else y
        if iv is None or not math.isfinite(float(iv)):
            raise DomainError("HestonCalibrator.fit needs the current implied volatility")
        self.params_, self.result_ = calibrate_heston(
            history, float(iv), init=self.init, window=self.window, bounds=self.bounds, return_result=True
        )
        return self

    def predict(self, snapshot):
        check_is_fitted(self, "params_")
        sim = SimulationConfig(self.n_paths, self.n_steps, 1.0, self.seed)
        est = price_snapshot(snapshot, "heston", self.params_, sim, self.day_count, self.n_workers)
        return np.array([e.price for e in est])


__all__ = [
    "GarchVolatility",
    "HestonCalibrator",
    "MertonCalibration",
    "MertonCalibrator",
    "MonteCarloPricer",
    "PriceEstimate",
    "forecast_prices",
    "price_snapshot",
]
