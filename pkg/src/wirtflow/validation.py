"""Input validation helpers used throughout the package."""

from __future__ import annotations

import numbers

import numpy as np


def as_complex_vector(z, n: int | None = None, name: str = "z") -> np.ndarray:
    """Coerce to a 1-D complex128 array, optionally enforcing its length."""
    arr = np.asarray(z, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def as_complex_matrix(a, name: str = "A") -> np.ndarray:
    """Coerce to a 2-D complex128 array with at least one row and column."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be nonempty, got shape {arr.shape}")
    return arr


def as_count_vector(y, m: int | None = None, name: str = "counts") -> np.ndarray:
    """Coerce to a 1-D float array of finite nonnegative values.

    Counts are integers in practice, but the loss algebra only needs
    nonnegative reals (and some tests feed it exact noiseless intensities).
    """
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if m is not None and arr.shape[0] != m:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {m}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} contains negative entries")
    return arr


def check_positive(value, name: str) -> float:
    """Require a finite real number strictly greater than zero."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


def check_nonnegative(value, name: str) -> float:
    """Require a finite real number greater than or equal to zero."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be nonnegative and finite, got {value}")
    return value


def check_count(value, name: str, minimum: int = 1) -> int:
    """Require an integer greater than or equal to ``minimum``."""
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value
