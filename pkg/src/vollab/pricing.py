"""Payoffs, discounting, Monte Carlo estimators and closed-form oracles."""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, poisson

from .errors import DomainError
from .validation import check_count, check_option_type

SERIES_TAIL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PriceEstimate:
    price: float
    standard_error: float
    n_paths: int

    def __post_init__(self):
        if self.standard_error < 0:
            raise DomainError("standard_error must be >= 0")
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")

    def within(self, reference, n_se=3.0):
        return abs(self.price - reference) <= n_se * self.standard_error


def payoff(S_T, K, option_type="call"):
    check_option_type(option_type)
    S_T = np.asarray(S_T, dtype=float)
    if option_type == "call":
        return np.maximum(S_T - K, 0.0)
    return np.maximum(K - S_T, 0.0)


def discount(value, r, T):
    if T < 0:
        raise DomainError(f"T must be >= 0, got {T}")
    return value * math.exp(-r * T)


def mc_price(grid, K, option_type="call", r=None, T=None):
    """Discounted mean terminal payoff with its Monte Carlo standard error.

    ``r`` and ``T`` default to the grid's own configuration; when given they
    must agree with it.
    """
    values = np.asarray(getattr(grid, "values", grid))
    if values.ndim != 2 or values.shape[0] == 0:
        raise DomainError("mc_price needs a non-empty (n_paths, n_steps + 1) grid")
    config = getattr(grid, "config", None)
    if config is not None:
        if T is not None and not math.isclose(T, config.horizon_T, rel_tol=1e-12, abs_tol=1e-15):
            raise DomainError(f"T={T} inconsistent with grid horizon {config.horizon_T}")
        T = config.horizon_T if T is None else T
        r = config.risk_free_rate if r is None else r
    if r is None or T is None:
        raise DomainError("r and T are required for a bare array grid")
    pay = payoff(values[:, -1], K, option_type)
    n = pay.size
    df = math.exp(-r * T)
    sd = float(pay.std(ddof=1)) if n > 1 else 0.0
    return PriceEstimate(df * float(pay.mean()), df * sd / math.sqrt(n), n)


def black_scholes_price(S0, K, r, sigma, T, option_type="call"):
    """European Black-Scholes value, including the ``T = 0`` and ``sigma = 0`` limits."""
    check_option_type(option_type)
    if sigma < 0 or T < 0:
        raise DomainError("sigma and T must be non-negative")
    df = math.exp(-r * T)
    sd = sigma * math.sqrt(T)
    if sd == 0.0:
        forward = S0 * math.exp(r * T)
        intrinsic = forward - K if option_type == "call" else K - forward
        return df * max(intrinsic, 0.0)
    if K <= 0:
        # zero strike: the call is the forward claim, the put is worthless
        return S0 if option_type == "call" else 0.0
    d1 = (math.log(S0 / K) + (r + 0.5 * sigma * sigma) * T) / sd
    d2 = d1 - sd
    if option_type == "call":
        return S0 * norm.cdf(d1) - K * df * norm.cdf(d2)
    return K * df * norm.cdf(-d2) - S0 * norm.cdf(-d1)


def merton_series_price(S0, K, r, sigma, T, jump, n_terms=50, option_type="call"):
    """Merton's Poisson-weighted Black-Scholes series for a compensated jump-diffusion.

    Conditional on ``n`` jumps the log price is Gaussian with variance
    ``sigma^2 T + n sigma_j^2`` and an adjusted drift; the terms are weighted by
    Poisson(lambda' T), lambda' = lambda_j (1 + k), k = E[J] - 1.
    """
    n_terms = check_count(n_terms, "n_terms")
    lam, mu_j, sig_j = jump.lambda_j, jump.mu_j, jump.sigma_j
    if lam == 0.0 or T == 0.0:
        return black_scholes_price(S0, K, r, sigma, T, option_type)
    k = math.expm1(mu_j + 0.5 * sig_j**2)
    lam_prime = lam * (1.0 + k)
    mean = lam_prime * T
    tail = poisson.sf(n_terms, mean)
    if tail >= SERIES_TAIL_TOLERANCE:
        warnings.warn(
            f"series truncated at {n_terms} terms leaves Poisson tail mass {tail:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    total = 0.0
    for n in range(n_terms + 1):
        weight = poisson.pmf(n, mean)
        sigma_n = math.sqrt(sigma**2 + n * sig_j**2 / T)
        r_n = r - lam * k + n * math.log1p(k) / T
        total += weight * black_scholes_price(S0, K, r_n, sigma_n, T, option_type)
    return total
