"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .geometry import wrap_angle


def check_sinogram(S, n_views=None) -> np.ndarray:
    """Return a finite float64 ``p x q`` sinogram.

    A 1-D input is reshaped column-wise when ``n_views`` is given.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim == 1:
        if n_views is None or S.size % n_views:
            raise ValueError(f"cannot reshape a length-{S.size} sinogram into {n_views} views")
        S = S.reshape((-1, n_views), order="F")
    S = check_array(S, dtype=np.float64, ensure_2d=True, ensure_all_finite=True, order="F", copy=False)
    if n_views is not None and S.shape[1] != n_views:
        raise ValueError(f"sinogram has {S.shape[1]} views, expected {n_views}")
    return S


def check_angles(angles, n_views=None) -> np.ndarray:
    a = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if a.ndim != 1:
        raise ValueError("angles must be one-dimensional")
    if not np.all(np.isfinite(a)):
        raise ValueError("angles contain non-finite values")
    if n_views is not None and a.size != n_views:
        raise ValueError(f"got {a.size} angles for {n_views} views")
    return wrap_angle(a)


def check_positive(name, value, allow_none=False):
    if value is None and allow_none:
        return None
    if not (np.isscalar(value) and np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return value


def check_count(name, value, minimum=1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
