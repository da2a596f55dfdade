"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigError

PROFILE_COLUMNS = ("footprint_bytes", "reads", "writes", "cache_friendly")


def check_stride_matrix(X) -> np.ndarray:
    """``(n, 1)`` float array of byte strides; NaN marks an indirect access."""
    X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan")
    if X.shape[1] != 1:
        raise ValueError(f"expected one column of byte strides, got {X.shape[1]}")
    finite = X[~np.isnan(X)]
    if not np.all(finite == np.round(finite)):
        raise ValueError("byte strides must be whole numbers")
    return X


def check_profile_matrix(X) -> np.ndarray:
    """``(n, 4)`` int64 array with the columns of :data:`PROFILE_COLUMNS`."""
    X = check_array(X, dtype=None)
    if X.shape[1] != len(PROFILE_COLUMNS):
        raise ValueError(f"expected {len(PROFILE_COLUMNS)} columns {PROFILE_COLUMNS}, got {X.shape[1]}")
    as_int = X.astype(np.int64)
    if not np.array_equal(as_int, X):
        raise ValueError("variable profiles must be integral")
    if np.any(as_int[:, 0] <= 0):
        raise ConfigError("footprints must be positive")
    if np.any(as_int[:, 1:3] < 0):
        raise ConfigError("access counts must be >= 0")
    if not np.isin(as_int[:, 3], (0, 1)).all():
        raise ConfigError("cache_friendly must be 0 or 1")
    return as_int


def check_names(names, n: int) -> list:
    if names is None:
        return [f"v{i}" for i in range(n)]
    names = [str(x) for x in names]
    if len(names) != n:
        raise ValueError(f"got {len(names)} names for {n} rows")
    if len(set(names)) != n:
        raise ValueError("variable names must be unique")
    return names
