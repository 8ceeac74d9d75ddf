"""Input validation helpers used across the estimators and functional API."""

import math

import numpy as np
from sklearn.utils.validation import check_array

from .errors import DomainError

OPTION_TYPES = ("call", "put")


def check_option_type(option_type):
    if option_type not in OPTION_TYPES:
        raise DomainError(f"option_type must be 'call' or 'put', got {option_type!r}")
    return option_type


def check_finite_scalar(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def check_positive(value, name):
    value = check_finite_scalar(value, name)
    if value <= 0:
        raise DomainError(f"{name} must be > 0, got {value}")
    return value


def check_non_negative(value, name):
    value = check_finite_scalar(value, name)
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return value


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value:
        raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_correlation(rho):
    rho = check_finite_scalar(rho, "rho")
    if abs(rho) > 1:
        raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    return rho


def check_series(values, name="values", min_length=1):
    """Coerce ``values`` to a finite 1-D float array of at least ``min_length``.

    Accepts lists, arrays, and objects exposing a ``values`` attribute (such as
    :class:`~vollab.market_data.ReturnSeries`).
    """
    values = getattr(values, "values", values)
    try:
        arr = check_array(
            np.asarray(values, dtype=float).reshape(-1, 1),
            ensure_2d=True,
            ensure_min_samples=0,
            dtype=np.float64,
        ).ravel()
    except ValueError as exc:
        raise DomainError(f"{name}: {exc}") from None
    if arr.size < min_length:
        raise DomainError(f"{name} needs at least {min_length} values, got {arr.size}")
    return arr
