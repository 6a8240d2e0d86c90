"""Small input-validation helpers shared by the estimator-style interfaces."""

from __future__ import annotations

import numpy as np


def check_matrix(a, name: str = "A") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def check_vector(b, length: int | None = None, name: str = "b") -> np.ndarray:
    b = np.asarray(b, dtype=float).ravel()
    if length is not None and b.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {b.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise ValueError(f"{name} contains non-finite entries")
    return b
