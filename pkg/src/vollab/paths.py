"""Path simulation for GBM, Merton jump-diffusion and Heston dynamics.

All three schemes advance the log price, so every simulated price is
positive.  Random numbers come from :mod:`vollab.rng` keyed by
``(seed, path, step, stream)``; ``n_workers`` only changes how the work is
split, never the result.
"""

import csv
import math
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .errors import DomainError
from .market_data import DEFAULT_RISK_FREE_RATE
from .validation import (
    check_correlation,
    check_count,
    check_finite_scalar,
    check_non_negative,
    check_positive,
)

# elements per generated block; bounds the temporaries of the Philox rounds
_BLOCK_ELEMENTS = 1 << 20
_CACHE_ENTRIES = 8


@dataclass(frozen=True)
class SimulationConfig:
    n_paths: int = 10_000
    n_steps: int = 100
    horizon_T: float = 1.0
    seed: int = 0
    risk_free_rate: float = DEFAULT_RISK_FREE_RATE

    def __post_init__(self):
        check_count(self.n_paths, "n_paths")
        check_count(self.n_steps, "n_steps")
        check_positive(self.horizon_T, "horizon_T")
        check_finite_scalar(self.risk_free_rate, "risk_free_rate")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def dt(self):
        return self.horizon_T / self.n_steps

    @property
    def times(self):
        return np.linspace(0.0, self.horizon_T, self.n_steps + 1)

    def with_horizon(self, horizon_T):
        return replace(self, horizon_T=horizon_T)


@dataclass(frozen=True)
class GbmParams:
    sigma: float

    def __post_init__(self):
        check_non_negative(self.sigma, "sigma")


@dataclass(frozen=True)
class MertonJumpParams:
    sigma: float
    lambda_j: float
    mu_j: float
    sigma_j: float
    compensated: bool = True

    def __post_init__(self):
        check_non_negative(self.sigma, "sigma")
        check_non_negative(self.lambda_j, "lambda_j")
        check_finite_scalar(self.mu_j, "mu_j")
        check_non_negative(self.sigma_j, "sigma_j")

    @property
    def compensator(self):
        """Drift correction that keeps the discounted price a martingale."""
        if not self.compensated:
            return 0.0
        return self.lambda_j * math.expm1(self.mu_j + 0.5 * self.sigma_j**2)


@dataclass(frozen=True)
class HestonParams:
    kappa: float
    theta: float
    sigma_v: float
    rho: float
    v0: float

    def __post_init__(self):
        check_non_negative(self.kappa, "kappa")
        check_non_negative(self.theta, "theta")
        check_non_negative(self.sigma_v, "sigma_v")
        check_correlation(self.rho)
        check_non_negative(self.v0, "v0")

    @property
    def feller_satisfied(self):
        return 2.0 * self.kappa * self.theta >= self.sigma_v**2


@dataclass(frozen=True)
class PathGrid:
    values: np.ndarray = field(repr=False)
    config: SimulationConfig

    @property
    def terminal(self):
        return self.values[:, -1]

    @property
    def n_paths(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class VarianceGrid:
    values: np.ndarray = field(repr=False)

    @property
    def terminal(self):
        return self.values[:, -1]


def correlate(z1, z_tilde, rho):
    """Mix two independent standard normals into one with correlation ``rho`` to ``z1``."""
    rho = check_correlation(rho)
    return rho * np.asarray(z1) + math.sqrt(1.0 - rho * rho) * np.asarray(z_tilde)


class _DrawCache:
    """Small LRU of draw matrices.

    Calibration re-simulates with one seed many times; the draws do not
    depend on model parameters so they are generated once.
    """

    def __init__(self, entries=_CACHE_ENTRIES):
        self.entries = entries
        self._store = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key, build):
        with self._lock:
            if key in self._store:
                self._store.move_to_end(key)
                return self._store[key]
        value = build()
        value.setflags(write=False)
        with self._lock:
            self._store[key] = value
            self._store.move_to_end(key)
            while len(self._store) > self.entries:
                self._store.popitem(last=False)
        return value

    def clear(self):
        with self._lock:
            self._store.clear()


_cache = _DrawCache()


def clear_draw_cache():
    _cache.clear()


def _generate(kind, seed, stream, n_paths, n_steps, n_workers):
    out = np.empty((n_paths, n_steps))
    fn = rng.normals if kind == "normal" else rng.uniforms
    rows = max(1, _BLOCK_ELEMENTS // n_steps)
    blocks = [(lo, min(lo + rows, n_paths)) for lo in range(0, n_paths, rows)]

    def fill(block):
        lo, hi = block
        out[lo:hi] = fn(seed, stream, np.arange(lo, hi), np.arange(n_steps))

    if n_workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for block in blocks:
            fill(block)
    return out


def draws(config, stream, kind="normal", n_workers=1):
    """Draw matrix ``(n_paths, n_steps)`` for one stream of ``config.seed``."""
    key = (kind, int(config.seed), stream, config.n_paths, config.n_steps)
    return _cache.get(
        key,
        lambda: _generate(kind, int(config.seed), stream, config.n_paths, config.n_steps, n_workers),
    )


def _log_increment(r, variance, drift_adjust, dt, z):
    return (r - 0.5 * variance - drift_adjust) * dt + np.sqrt(variance * dt) * z


def _to_grid(S0, increments, config):
    values = np.empty((increments.shape[0], increments.shape[1] + 1))
    values[:, 0] = S0
    values[:, 1:] = S0 * np.exp(np.cumsum(increments, axis=1))
    return PathGrid(values, config)


def poisson_inverse(u, mean):
    """Poisson(mean) quantiles of uniforms ``u`` by sequential CDF search."""
    u = np.asarray(u)
    counts = np.zeros(u.shape, dtype=np.int64)
    if mean <= 0:
        return counts
    p = math.exp(-mean)
    cdf = p
    active = u > cdf
    k = 0
    limit = mean + 40.0 * math.sqrt(mean) + 40.0
    while active.any() and k < limit:
        counts += active
        k += 1
        p *= mean / k
        if p == 0.0:
            break
        cdf += p
        active &= u > cdf
    return counts


def simulate_gbm(S0, params, config, n_workers=1):
    S0 = check_positive(S0, "S0")
    z = draws(config, rng.DIFFUSION, n_workers=n_workers)
    inc = _log_increment(config.risk_free_rate, params.sigma**2, 0.0, config.dt, z)
    return _to_grid(S0, inc, config)


def simulate_merton(S0, params, config, n_workers=1):
    """Log-Euler jump-diffusion.

    Per step the jump count is Poisson(lambda_j * dt); the sum of ``n`` normal
    log-jumps is drawn as ``n*mu_j + sigma_j*sqrt(n)*Z``, which has the same
    law as adding ``n`` independent draws.
    """
    S0 = check_positive(S0, "S0")
    dt = config.dt
    z = draws(config, rng.DIFFUSION, n_workers=n_workers)
    inc = _log_increment(config.risk_free_rate, params.sigma**2, params.compensator, dt, z)
    if params.lambda_j > 0:
        u = draws(config, rng.JUMP_COUNT, kind="uniform", n_workers=n_workers)
        n_jumps = poisson_inverse(u, params.lambda_j * dt)
        if n_jumps.any():
            zj = draws(config, rng.JUMP_SIZE, n_workers=n_workers)
            inc = inc + (n_jumps * params.mu_j + params.sigma_j * np.sqrt(n_jumps) * zj)
    return _to_grid(S0, inc, config)


def simulate_heston(S0, params, config, n_workers=1):
    """Full-truncation Euler for the variance, log-Euler for the price.

    Returns ``(PathGrid, VarianceGrid)``.  The variance state is carried
    untruncated between steps; only ``max(v, 0)`` enters drift and diffusion,
    and the stored grid is floored at zero.
    """
    S0 = check_positive(S0, "S0")
    dt = config.dt
    r = config.risk_free_rate
    z1 = draws(config, rng.DIFFUSION, n_workers=n_workers)
    zt = draws(config, rng.VARIANCE, n_workers=n_workers)
    n, m = z1.shape
    inc = np.empty((n, m))
    var_grid = np.empty((n, m + 1))
    v = np.full(n, float(params.v0))
    var_grid[:, 0] = v
    for k in range(m):
        vp = np.maximum(v, 0.0)
        inc[:, k] = _log_increment(r, vp, 0.0, dt, z1[:, k])
        z2 = correlate(z1[:, k], zt[:, k], params.rho)
        v = v + params.kappa * (params.theta - vp) * dt + params.sigma_v * np.sqrt(vp * dt) * z2
        var_grid[:, k + 1] = np.maximum(v, 0.0)
    return _to_grid(S0, inc, config), VarianceGrid(var_grid)


def heston_mean_variance_path(params, v0, times):
    """Expected variance ``theta + (v0 - theta) * exp(-kappa * t)`` at each time."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise DomainError("times must be one-dimensional")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise DomainError("times must be non-negative and non-decreasing")
    kappa = getattr(params, "kappa", None)
    theta = getattr(params, "theta", None)
    if kappa is None:
        kappa, theta = params
    return theta + (v0 - theta) * np.exp(-kappa * times)


def write_path_csv(grid, path):
    """Dump a path grid as CSV, one row per path."""
    values = grid.values if hasattr(grid, "values") else np.asarray(grid)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path"] + [f"step{k}" for k in range(values.shape[1])])
        for i, row in enumerate(values):
            writer.writerow([i] + [repr(float(x)) for x in row])
