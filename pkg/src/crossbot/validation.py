"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np


def check_matrix(X, name: str = "X", dtype=None) -> np.ndarray:
    X = np.asarray(X, dtype=dtype)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if not np.isfinite(X).all():
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_labels(y, n_rows: int, n_classes: int = 2, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=np.int64).ravel()
    if y.shape[0] != n_rows:
        raise ValueError(f"{name} has {y.shape[0]} entries for {n_rows} rows")
    if y.size and ((y < 0).any() or (y >= n_classes).any()):
        raise ValueError(f"{name} must take values in [0, {n_classes})")
    return y


def check_domains(domains, n_rows: int, n_domains: int, allow_missing: bool = True) -> np.ndarray:
    domains = np.asarray(domains, dtype=np.int64).ravel()
    if domains.shape[0] != n_rows:
        raise ValueError(f"domains has {domains.shape[0]} entries for {n_rows} rows")
    low = -1 if allow_missing else 0
    if domains.size and ((domains < low).any() or (domains >= n_domains).any()):
        raise ValueError(
            f"domain labels must be in [{'-1' if allow_missing else '0'}, {n_domains})"
        )
    return domains
