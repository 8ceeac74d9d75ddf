"""GARCH(1,1) filtering, Gaussian maximum likelihood and variance forecasts.

Returns are modelled as zero-mean.  The recursion

    sigma2[t] = alpha0 + alpha1 * r[t-1]**2 + beta1 * sigma2[t-1]

is seeded with the sample second moment of the returns, so the filtered
series has one more element than the returns: its last entry is the
one-step-ahead variance.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import CalibrationError, DomainError, NumericError
from .optimize import Bounds, minimize_box_constrained
from .validation import check_count, check_non_negative, check_series

TRADING_DAYS = 252
MIN_FIT_LENGTH = 50
MIN_LIKELIHOOD_LENGTH = 10
MAX_PERSISTENCE = 0.999
ALPHA0_FLOOR = 1e-10
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GarchParams:
    alpha0: float
    alpha1: float
    beta1: float

    def __post_init__(self):
        for name in ("alpha0", "alpha1", "beta1"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.alpha0 <= 0:
            raise DomainError(f"alpha0 must be > 0, got {self.alpha0}")
        if self.alpha1 < 0 or self.beta1 < 0:
            raise DomainError("alpha1 and beta1 must be >= 0")

    @property
    def persistence(self):
        return self.alpha1 + self.beta1

    @property
    def long_run_variance(self):
        if self.persistence >= 1:
            return math.inf
        return self.alpha0 / (1.0 - self.persistence)


@dataclass(frozen=True)
class GarchState:
    last_variance: float
    last_innovation_sq: float

    def __post_init__(self):
        check_non_negative(self.last_variance, "last_variance")
        check_non_negative(self.last_innovation_sq, "last_innovation_sq")


def sample_second_moment(returns):
    r = check_series(returns, "returns")
    return float(np.mean(r * r))


def garch_filter(params, returns, initial_variance):
    """Conditional variances ``[sigma2_0, ..., sigma2_n]`` for ``n`` returns."""
    if not isinstance(params, GarchParams):
        params = GarchParams(*params)
    r = check_series(returns, "returns", min_length=0)
    init = check_non_negative(initial_variance, "initial_variance")
    drive = params.alpha0 + params.alpha1 * r * r
    out = np.empty(r.size + 1)
    out[0] = init
    if r.size:
        out[1:] = lfilter([1.0], [1.0, -params.beta1], drive, zi=[params.beta1 * init])[0]
    return out


def garch_neg_log_likelihood(params, returns, initial_variance=None):
    """Gaussian negative log-likelihood of zero-mean returns."""
    if not isinstance(params, GarchParams):
        params = GarchParams(*params)
    r = check_series(returns, "returns", min_length=MIN_LIKELIHOOD_LENGTH)
    if initial_variance is None:
        initial_variance = float(np.mean(r * r))
    sigma2 = garch_filter(params, r, initial_variance)[:-1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        value = 0.5 * float(np.sum(_LOG_2PI + np.log(sigma2) + r * r / sigma2))
    if not math.isfinite(value):
        raise NumericError("GARCH likelihood is not finite")
    return value


def garch_state(params, returns, initial_variance=None):
    """State after filtering ``returns``, ready for :func:`forecast_variance`."""
    r = check_series(returns, "returns")
    if initial_variance is None:
        initial_variance = float(np.mean(r * r))
    sigma2 = garch_filter(params, r, initial_variance)
    return GarchState(float(sigma2[-2]), float(r[-1] ** 2))


def _to_params(z, scale):
    omega, persistence, share = z
    return GarchParams(omega * scale, persistence * share, persistence * (1.0 - share))


def fit_garch(returns, max_iter=500, grad_tol=1e-6, return_result=False):
    """Maximum-likelihood GARCH(1,1) fit.

    The optimizer works in ``(alpha0 / m2, alpha1 + beta1, alpha1 / (alpha1 + beta1))``
    where ``m2`` is the sample second moment; in those coordinates the
    stationarity limit ``alpha1 + beta1 <= 0.999`` is a plain box bound.
    """
    r = check_series(returns, "returns", min_length=MIN_FIT_LENGTH)
    scale = float(np.mean(r * r))
    if not scale > 0:
        raise CalibrationError("returns have zero variance; GARCH is not identifiable")
    n = r.size
    bounds = Bounds(
        np.array([ALPHA0_FLOOR / scale, 0.0, 0.0]),
        np.array([math.inf, MAX_PERSISTENCE, 1.0]),
    )
    x0 = np.array([0.1, 0.9, 0.1])

    def objective(z):
        return garch_neg_log_likelihood(_to_params(z, scale), r, scale) / n

    try:
        result = minimize_box_constrained(
            objective, x0, bounds, max_iter=max_iter, grad_tol=grad_tol
        )
    except NumericError as exc:
        raise CalibrationError(f"GARCH fit failed: {exc}", last_iterate=exc.last_iterate) from exc
    if not math.isfinite(result.f_star):
        raise CalibrationError("GARCH fit returned a non-finite likelihood", result.x_star)
    params = _to_params(result.x_star, scale)
    return (params, result) if return_result else params


def forecast_variance(params, state, horizon):
    """Per-period variance forecasts for steps ``1..horizon``."""
    horizon = check_count(horizon, "horizon")
    out = np.empty(horizon)
    out[0] = params.alpha0 + params.alpha1 * state.last_innovation_sq + params.beta1 * state.last_variance
    phi = params.persistence
    for h in range(1, horizon):
        out[h] = params.alpha0 + phi * out[h - 1]
    return out


def annualize_volatility(daily_sigma, periods_per_year=TRADING_DAYS):
    daily_sigma = np.asarray(daily_sigma, dtype=float)
    if np.any(daily_sigma < 0):
        raise DomainError("daily volatility must be >= 0")
    out = daily_sigma * math.sqrt(periods_per_year)
    return float(out) if out.ndim == 0 else out
