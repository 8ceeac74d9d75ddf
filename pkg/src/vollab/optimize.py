"""Box-constrained limited-memory BFGS.

The search direction is the L-BFGS two-loop recursion restricted to the
variables that are not held at a bound; steps are projected back onto the
box and accepted by an Armijo backtracking search along the projection arc.
An accepted step is doubled while the slope along the direction still fails
the curvature condition, so short quasi-Newton steps do not stall progress.
Iterates are always feasible and objective values never increase.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError

ARMIJO_C1 = 1e-4
MAX_BACKTRACKS = 40
WOLFE_C2 = 0.9
MAX_EXPANSIONS = 30


@dataclass(frozen=True)
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise DomainError("lower and upper bounds must have the same length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise DomainError("bounds must not be NaN")
        bad = np.flatnonzero(lo > hi)
        if bad.size:
            i = int(bad[0])
            raise DomainError(f"bound {i}: lower {lo[i]} exceeds upper {hi[i]}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_pairs(cls, pairs):
        """Build from ``[(lo, hi), ...]``; ``None`` on either side means unbounded."""
        lo = [-math.inf if p[0] is None else p[0] for p in pairs]
        hi = [math.inf if p[1] is None else p[1] for p in pairs]
        return cls(np.array(lo, dtype=float), np.array(hi, dtype=float))

    @classmethod
    def unbounded(cls, n):
        return cls(np.full(n, -math.inf), np.full(n, math.inf))

    def __len__(self):
        return self.lower.size

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class OptimizationResult:
    x_star: np.ndarray
    f_star: float
    iterations: int
    converged: bool
    gradient_norm: float
    n_evaluations: int = 0
    message: str = ""
    history: tuple = field(default=(), repr=False)


def default_step(x):
    """Finite-difference step ``1e-4 * max(1, |x_i|)`` per coordinate."""
    return 1e-4 * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def _checked(f, x):
    value = float(f(x))
    if not math.isfinite(value):
        raise NumericError(f"objective is not finite at {np.asarray(x).tolist()}", last_iterate=x)
    return value


def numerical_gradient(f, x, h=None, bounds=None):
    """Central-difference gradient.

    ``h`` may be a scalar or per-coordinate array (default :func:`default_step`).
    With ``bounds``, a coordinate whose central stencil would leave the box
    falls back to a one-sided difference inside it.
    """
    x = np.asarray(x, dtype=float)
    steps = default_step(x) if h is None else np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    grad = np.empty_like(x)
    for i in range(x.size):
        hi_ = steps[i]
        up = x.copy()
        down = x.copy()
        up[i] += hi_
        down[i] -= hi_
        if bounds is not None:
            room_up = bounds.upper[i] - x[i]
            room_down = x[i] - bounds.lower[i]
            if room_down < hi_ and room_up >= hi_:
                grad[i] = (_checked(f, up) - _checked(f, x)) / hi_
                continue
            if room_up < hi_ and room_down >= hi_:
                grad[i] = (_checked(f, x) - _checked(f, down)) / hi_
                continue
        grad[i] = (_checked(f, up) - _checked(f, down)) / (2.0 * hi_)
    return grad


def projected_gradient(x, g, bounds):
    return bounds.project(x - g) - x


def _direction(g, free, s_hist, y_hist):
    q = np.where(free, g, 0.0)
    alphas = []
    pairs = []
    for s, y in zip(s_hist, y_hist):
        s_f = np.where(free, s, 0.0)
        y_f = np.where(free, y, 0.0)
        sy = float(s_f @ y_f)
        if sy > 1e-12 * float(np.linalg.norm(s_f) * np.linalg.norm(y_f)) and sy > 0:
            pairs.append((s_f, y_f, 1.0 / sy))
    for s_f, y_f, rho in reversed(pairs):
        a = rho * float(s_f @ q)
        alphas.append(a)
        q = q - a * y_f
    if pairs:
        s_f, y_f, _ = pairs[-1]
        q = q * (float(s_f @ y_f) / float(y_f @ y_f))
    for (s_f, y_f, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(y_f @ q)
        q = q + (a - b) * s_f
    return -q, bool(pairs)


def minimize_box_constrained(
    f,
    x0,
    bounds,
    max_iter=500,
    grad_tol=1e-6,
    memory=10,
    grad=None,
    fd_step=None,
    ftol=0.0,
    callback=None,
):
    """Minimize ``f`` over the box ``bounds`` starting from feasible ``x0``.

    Stops when the projected gradient's infinity norm drops below ``grad_tol``,
    after ``max_iter`` accepted steps, when the line search can make no further
    progress, or (if ``ftol > 0``) when the relative decrease of ``f`` falls
    below ``ftol``.  ``grad`` overrides the finite-difference gradient and
    ``fd_step`` the finite-difference step.
    """
    x = np.asarray(x0, dtype=float).copy()
    if len(bounds) != x.size:
        raise DomainError(f"bounds have {len(bounds)} coordinates, x0 has {x.size}")
    if not bounds.contains(x):
        raise DomainError(f"x0={x.tolist()} lies outside the bounds")
    n_eval = 0

    def fun(z):
        nonlocal n_eval
        n_eval += 1
        return _checked(f, z)

    def gradient(z):
        if grad is not None:
            g_ = np.asarray(grad(z), dtype=float)
        else:
            h = fd_step(z) if callable(fd_step) else fd_step
            g_ = numerical_gradient(fun, z, h=h, bounds=bounds)
        if not np.all(np.isfinite(g_)):
            raise NumericError("gradient is not finite", last_iterate=z)
        return g_

    fx = fun(x)
    g = gradient(x)
    history = [fx]
    s_hist, y_hist = [], []
    message = "max_iter reached"
    converged = False
    iteration = 0
    while True:
        pg = projected_gradient(x, g, bounds)
        pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
        if pg_norm < grad_tol:
            converged = True
            message = "projected gradient below tolerance"
            break
        if iteration >= max_iter:
            break
        at_lower = (x <= bounds.lower) & (g > 0)
        at_upper = (x >= bounds.upper) & (g < 0)
        free = ~(at_lower | at_upper)
        d, have_pairs = _direction(g, free, s_hist, y_hist)
        slope = float(g @ d)
        if not slope < 0:
            s_hist.clear()
            y_hist.clear()
            d = -np.where(free, g, 0.0)
            slope = float(g @ d)
            have_pairs = False
        alpha = 1.0 if have_pairs else min(1.0, 1.0 / max(float(np.linalg.norm(d)), 1e-300))

        accepted = False
        for _ in range(MAX_BACKTRACKS):
            x_new = bounds.project(x + alpha * d)
            step = x_new - x
            if not np.any(step):
                break
            f_new = fun(x_new)
            decrease = float(g @ step)
            if f_new <= fx + ARMIJO_C1 * decrease:
                accepted = True
                break
            denom = 2.0 * (f_new - fx - slope * alpha)
            trial = -slope * alpha * alpha / denom if denom > 0 else 0.5 * alpha
            alpha = min(max(trial, 0.1 * alpha), 0.5 * alpha)
        if not accepted:
            message = "line search could not decrease the objective"
            converged = pg_norm < grad_tol
            break

        g_new = gradient(x_new)
        # Extrapolate while the slope along d is still steep (curvature condition fails).
        for _ in range(MAX_EXPANSIONS):
            if float(g_new @ d) >= WOLFE_C2 * slope:
                break
            x_try = bounds.project(x + 2.0 * alpha * d)
            if np.array_equal(x_try, x_new):
                break
            f_try = fun(x_try)
            if not f_try <= min(f_new, fx + ARMIJO_C1 * float(g @ (x_try - x))):
                break
            alpha *= 2.0
            x_new, f_new = x_try, f_try
            g_new = gradient(x_new)
        s = x_new - x
        y = g_new - g
        if float(s @ y) > 1e-10 * float(y @ y):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        rel_change = (fx - f_new) / max(abs(fx), abs(f_new), 1.0)
        x, fx, g = x_new, f_new, g_new
        iteration += 1
        history.append(fx)
        if callback is not None:
            callback(x.copy(), fx)
        if ftol > 0 and rel_change <= ftol:
            pg = projected_gradient(x, g, bounds)
            pg_norm = float(np.max(np.abs(pg)))
            converged = True
            message = "relative objective decrease below ftol"
            break

    return OptimizationResult(
        x_star=x,
        f_star=fx,
        iterations=iteration,
        converged=converged,
        gradient_norm=pg_norm,
        n_evaluations=n_eval,
        message=message,
        history=tuple(history),
    )
