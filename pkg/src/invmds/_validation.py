"""Input validation helpers used by every public entry point."""

import numbers

import numpy as np

from .exceptions import ConfigurationError, InvalidInputError


def check_points(F, *, min_points=1):
    """Return coordinates as a finite float64 ``(N, d)`` array.

    Accepts a :class:`~invmds.geometry.PointCloud` or anything array-like.
    """
    coords = getattr(F, "coords", F)
    try:
        arr = np.asarray(coords, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"coordinates are not numeric: {exc}") from None
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidInputError(f"expected an (N, d) coordinate matrix, got ndim={arr.ndim}")
    n, d = arr.shape
    if n < min_points or d < 1:
        raise InvalidInputError(f"need at least {min_points} point(s) and d >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("coordinates contain NaN or infinity")
    return arr


def check_symmetric(S, *, name="matrix", rtol=1e-12):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InvalidInputError(f"{name} contains NaN or infinity")
    scale = max(1.0, float(np.max(np.abs(S), initial=0.0)))
    if np.max(np.abs(S - S.T), initial=0.0) > rtol * scale:
        raise InvalidInputError(f"{name} is not symmetric")
    return S


def check_distance_matrix(D, *, rtol=1e-12):
    """Validate a Euclidean-style distance matrix: symmetric, nonnegative, zero diagonal."""
    D = check_symmetric(D, name="distance matrix", rtol=rtol)
    scale = max(1.0, float(np.max(D, initial=0.0)))
    if np.min(D, initial=0.0) < 0:
        raise InvalidInputError("distance matrix has negative entries")
    if np.max(np.abs(np.diag(D)), initial=0.0) > rtol * scale:
        raise InvalidInputError("distance matrix must have a zero diagonal")
    return D


def check_int(value, name, *, low=None, high=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidInputError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if low is not None and value < low:
        raise InvalidInputError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise InvalidInputError(f"{name} must be <= {high}, got {value}")
    return value


def check_positive(value, name, *, error=ConfigurationError):
    if not (isinstance(value, numbers.Real) and np.isfinite(value) and value > 0):
        raise error(f"{name} must be a positive finite number, got {value!r}")
    return float(value)
