"""Model calibration: Merton jumps to option prices, Heston to realized variance.

Both calibrations run :func:`vollab.optimize.minimize_box_constrained`.  The
Merton objective is simulation based; it re-uses one seed for every
evaluation so that the objective is a deterministic function of the jump
parameters and finite-difference gradients are meaningful.
"""

import datetime as dt
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, DomainError, NumericError, ParseError
from .market_data import (
    DEFAULT_VARIANCE_WINDOW,
    log_returns,
    realized_variance,
    time_to_expiry,
)
from .optimize import Bounds, minimize_box_constrained
from .paths import HestonParams, MertonJumpParams, SimulationConfig, heston_mean_variance_path, simulate_merton
from .pricing import PriceEstimate, mc_price, payoff
from .validation import check_series

log = logging.getLogger(__name__)

MERTON_INIT = (0.1, 0.02, 0.05)
MERTON_BOUNDS = Bounds(np.array([0.0, -1.0, 1e-6]), np.array([5.0, 1.0, 2.0]))
HESTON_BOUNDS = Bounds(np.array([1e-3, 1e-6]), np.array([50.0, 4.0]))
HESTON_KAPPA_INIT = 2.0
SIGMA_V_RANGE = (1e-4, 5.0)
RHO_LIMIT = 0.999
PERIODS_PER_YEAR = 252


@dataclass(frozen=True)
class MertonCalibration:
    """Calibrated jump parameters; the diffusion volatility stays per contract."""

    lambda_j: float
    mu_j: float
    sigma_j: float
    objective: float
    seed: int
    compensated: bool = True
    result: object = field(default=None, repr=False, compare=False)

    def params(self, sigma):
        return MertonJumpParams(sigma, self.lambda_j, self.mu_j, self.sigma_j, self.compensated)

    @property
    def jump_vector(self):
        return np.array([self.lambda_j, self.mu_j, self.sigma_j])


def _jump_triple(jump):
    if isinstance(jump, (MertonJumpParams, MertonCalibration)):
        return float(jump.lambda_j), float(jump.mu_j), float(jump.sigma_j)
    lam, mu, sig = (float(v) for v in jump)
    return lam, mu, sig


def contract_price(simulate, S0, params, contract, snapshot, sim, day_count="ACT/365", n_workers=1, as_of=None):
    """Monte Carlo price of one contract; expired contracts return intrinsic value.

    ``as_of`` overrides the snapshot date when pricing as of a later day.
    """
    T = time_to_expiry(contract.expiration, as_of or snapshot.as_of, day_count)
    if T == 0.0:
        value = float(payoff(S0, contract.strike, contract.option_type))
        return PriceEstimate(value, 0.0, sim.n_paths)
    cfg = SimulationConfig(sim.n_paths, sim.n_steps, T, sim.seed, snapshot.risk_free_rate)
    grid = simulate(S0, params, cfg, n_workers=n_workers)
    if isinstance(grid, tuple):
        grid = grid[0]
    return mc_price(grid, contract.strike, contract.option_type)


def merton_model_prices(jump, snapshot, sim, compensated=True, day_count="ACT/365", n_workers=1):
    lam, mu, sig = _jump_triple(jump)
    out = []
    for c in snapshot.contracts:
        params = MertonJumpParams(c.implied_volatility, lam, mu, sig, compensated)
        out.append(
            contract_price(simulate_merton, snapshot.spot, params, c, snapshot, sim, day_count, n_workers)
        )
    return out


def merton_sse_objective(jump, snapshot, sim, compensated=True, day_count="ACT/365", n_workers=1):
    """Sum over contracts of (simulated Merton price - market price)^2.

    The diffusion volatility of each contract is its implied volatility; only
    ``(lambda_j, mu_j, sigma_j)`` are taken from ``jump``.
    """
    try:
        prices = merton_model_prices(jump, snapshot, sim, compensated, day_count, n_workers)
    except (FloatingPointError, OverflowError) as exc:
        raise NumericError(f"Merton simulation failed: {exc}") from exc
    model = np.array([p.price for p in prices])
    value = float(np.sum((model - snapshot.market_prices) ** 2))
    if not math.isfinite(value):
        raise NumericError("Merton objective is not finite")
    return value


def heston_variance_loss(kappa, theta, observed, times, v0):
    """Squared distance between observed variances and the Heston mean path."""
    observed = check_series(observed, "observed")
    times = np.asarray(times, dtype=float)
    if times.shape != observed.shape:
        raise DomainError("observed and times must have the same length")
    if v0 < 0:
        raise DomainError("v0 must be >= 0")
    predicted = heston_mean_variance_path((kappa, theta), v0, times)
    return float(np.sum((observed - predicted) ** 2))


def calibrate_merton(
    snapshot,
    init=MERTON_INIT,
    bounds=MERTON_BOUNDS,
    sim=None,
    compensated=True,
    day_count="ACT/365",
    max_iter=100,
    grad_tol=1e-6,
    fd_step=None,
    n_workers=1,
):
    """Fit ``(lambda_j, mu_j, sigma_j)`` to the snapshot's market prices."""
    sim = sim or SimulationConfig()
    x0 = np.asarray(init, dtype=float)
    if not bounds.contains(x0):
        raise DomainError(f"initial jump parameters {x0.tolist()} lie outside the bounds")

    def objective(x):
        return merton_sse_objective(x, snapshot, sim, compensated, day_count, n_workers)

    try:
        result = minimize_box_constrained(
            objective, x0, bounds, max_iter=max_iter, grad_tol=grad_tol, fd_step=fd_step, ftol=1e-12
        )
    except NumericError as exc:
        raise CalibrationError(f"Merton calibration failed: {exc}", last_iterate=exc.last_iterate) from exc
    if not result.converged:
        log.warning("Merton calibration stopped early: %s", result.message)
    lam, mu, sig = (float(v) for v in result.x_star)
    return MertonCalibration(lam, mu, sig, float(result.f_star), int(sim.seed), compensated, result)


def observed_variance(history, window=DEFAULT_VARIANCE_WINDOW, periods_per_year=PERIODS_PER_YEAR):
    """Annualized rolling variance and the year-fraction time of each value.

    The first value sits one period after the start, the next one period
    later, and so on.
    """
    returns = log_returns(history)
    var = realized_variance(returns, window) * periods_per_year
    times = np.arange(1, var.size + 1) / periods_per_year
    return returns, times, var


def fit_heston_mean_path(observed, times, v0, init=None, bounds=HESTON_BOUNDS, max_iter=500, grad_tol=1e-10):
    """Least-squares ``(kappa, theta)`` of the Heston mean-variance path.

    Returns ``(kappa, theta, OptimizationResult)``.  The loss is divided by
    ``n * mean(observed)^2`` before optimizing, which leaves the minimizer
    unchanged and makes ``grad_tol`` scale free.
    """
    observed = check_series(observed, "observed")
    times = np.asarray(times, dtype=float)
    level = float(np.mean(observed))
    if init is None:
        init = (HESTON_KAPPA_INIT, level)
    x0 = bounds.project(np.asarray(init, dtype=float))
    norm = observed.size * max(level, 1e-12) ** 2

    def objective(x):
        return heston_variance_loss(x[0], x[1], observed, times, v0) / norm

    try:
        result = minimize_box_constrained(objective, x0, bounds, max_iter=max_iter, grad_tol=grad_tol)
    except NumericError as exc:
        raise CalibrationError(f"Heston calibration failed: {exc}", last_iterate=exc.last_iterate) from exc
    return float(result.x_star[0]), float(result.x_star[1]), result


def estimate_sigma_v(variance, dt):
    """Moment estimate ``sqrt(mean(dv^2 / (v * dt)))``, clipped to ``SIGMA_V_RANGE``."""
    variance = np.asarray(variance, dtype=float)
    v = variance[:-1]
    dv = np.diff(variance)
    keep = v > 0
    if not keep.any():
        return SIGMA_V_RANGE[0]
    est = math.sqrt(float(np.mean(dv[keep] ** 2 / (v[keep] * dt))))
    return float(np.clip(est, *SIGMA_V_RANGE))


def estimate_rho(returns, variance, window):
    """Correlation of each return with the variance change it completes."""
    r = np.asarray(getattr(returns, "values", returns), dtype=float)
    dv = np.diff(np.asarray(variance, dtype=float))
    r = r[window : window + dv.size]
    if dv.size < 2 or np.std(r) == 0 or np.std(dv) == 0:
        return 0.0
    rho = float(np.corrcoef(r, dv)[0, 1])
    return float(np.clip(rho, -RHO_LIMIT, RHO_LIMIT))


def calibrate_heston(
    history,
    iv,
    init=None,
    window=DEFAULT_VARIANCE_WINDOW,
    bounds=HESTON_BOUNDS,
    periods_per_year=PERIODS_PER_YEAR,
    return_result=False,
):
    """Heston parameters from a price history and a current implied volatility.

    ``v0 = iv**2``; ``(kappa, theta)`` fit the mean-variance path to the
    rolling realized variance.  The mean path does not depend on ``sigma_v``
    or ``rho``, so those come from moment estimates on the same data.
    """
    if not iv > 0:
        raise DomainError(f"implied volatility must be > 0, got {iv}")
    returns, times, var = observed_variance(history, window, periods_per_year)
    v0 = float(iv) ** 2
    kappa, theta, result = fit_heston_mean_path(var, times, v0, init=init, bounds=bounds)
    if not math.isfinite(result.f_star):
        raise CalibrationError("Heston calibration returned a non-finite loss", result.x_star)
    sigma_v = estimate_sigma_v(var, 1.0 / periods_per_year)
    rho = estimate_rho(returns, var, window)
    params = HestonParams(kappa, theta, sigma_v, rho, v0)
    return (params, result) if return_result else params


def params_document(model, params, seed, objective, as_of):
    """Serializable calibration record shared with the CLI."""
    if model == "merton":
        body = {
            "lambda_j": params.lambda_j,
            "mu_j": params.mu_j,
            "sigma_j": params.sigma_j,
            "compensated": bool(params.compensated),
        }
    elif model == "heston":
        body = {k: getattr(params, k) for k in ("kappa", "theta", "sigma_v", "rho", "v0")}
    elif model == "gbm":
        body = {"sigma": params.sigma}
    else:
        raise DomainError(f"unknown model {model!r}")
    body = {k: (float(v) if not isinstance(v, bool) else v) for k, v in body.items()}
    as_of = as_of.isoformat() if isinstance(as_of, dt.date) else as_of
    return {"model": model, "params": body, "seed": int(seed), "objective": float(objective), "as_of": as_of}


def dump_params(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def load_params(path):
    """Read a parameter document; returns ``(model, params_dict, doc)``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from None
    for key in ("model", "params"):
        if key not in doc:
            raise ParseError(f"{path}: missing field {key!r}", field=key)
    if doc["model"] not in ("gbm", "merton", "heston"):
        raise ParseError(f"{path}: unknown model {doc['model']!r}", field="model")
    return doc["model"], dict(doc["params"]), doc
