"""Input validation helpers shared by the estimators and free functions."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ValidationError


def check_point(p, name="point"):
    """Return ``p`` as a finite float array of shape (3,)."""
    arr = np.asarray(p, dtype=float)
    if arr.shape != (3,):
        raise ValidationError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite coordinates")
    return arr


def check_points(X, min_points=1, name="points"):
    """Return ``X`` as a finite (n, 3) float array with at least ``min_points`` rows."""
    try:
        arr = check_array(X, dtype=np.float64, ensure_min_samples=min_points)
    except ValueError as exc:
        raise ValidationError(f"{name}: {exc}") from exc
    if arr.shape[1] != 3:
        raise ValidationError(f"{name} must have 3 columns, got {arr.shape[1]}")
    return arr


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValidationError(f"{name} must be a finite value >= 0, got {value}")
    return value
