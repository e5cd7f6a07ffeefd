"""Input validation helpers shared across the library.

All numeric entry points convert their inputs to float64 numpy arrays and
check shapes, finiteness and probability-sum constraints here, so the math
code can assume clean data.
"""

import numpy as np

# Absolute tolerance on probability sums; file-parsed weights carry decimal
# rounding, so exact sums cannot be required.
PROB_ATOL = 1e-9


def check_features(X, n_features=None):
    """Validate a feature matrix: 2-D, finite, float64."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(
            f"expected {n_features} features, got {X.shape[1]}"
        )
    return X


def check_labels(y, n_classes):
    """Validate a label vector: 1-D integers in [0, n_classes)."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {y.shape}")
    if y.size and not np.issubdtype(y.dtype, np.integer):
        yf = np.asarray(y, dtype=np.float64)
        yi = yf.astype(np.int64)
        if not np.all(yi == yf):
            raise ValueError("labels must be integers")
        y = yi
    y = y.astype(np.int64, copy=False)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        bad = y[(y < 0) | (y >= n_classes)][0]
        raise ValueError(f"label {bad} out of range [0, {n_classes})")
    return y


def check_prob_vector(p, num_classes=None):
    """Validate a probability vector: non-negative entries summing to 1."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"probability vector must be 1-D, got shape {p.shape}")
    if num_classes is not None and p.size != num_classes:
        raise ValueError(f"expected length {num_classes}, got {p.size}")
    if p.size == 0:
        raise ValueError("probability vector is empty")
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    s = p.sum()
    if abs(s - 1.0) > PROB_ATOL:
        raise ValueError(f"probabilities sum to {s!r}, not 1")
    return p


def check_prob_matrix(P, n_classes=None):
    """Validate a row-stochastic matrix of per-row class probabilities."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2:
        raise ValueError(f"probability matrix must be 2-D, got shape {P.shape}")
    if n_classes is not None and P.shape[1] != n_classes:
        raise ValueError(f"expected {n_classes} columns, got {P.shape[1]}")
    if np.any(P < 0):
        raise ValueError("probabilities must be non-negative")
    if P.shape[0] and np.max(np.abs(P.sum(axis=1) - 1.0)) > PROB_ATOL:
        raise ValueError("probability matrix rows must sum to 1")
    return P


def check_joint_table(table):
    """Validate a joint probability table: 2-D, non-negative, total mass 1."""
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2:
        raise ValueError(f"joint table must be 2-D, got shape {table.shape}")
    if np.any(table < 0):
        raise ValueError("joint table entries must be non-negative")
    s = table.sum()
    if abs(s - 1.0) > PROB_ATOL:
        raise ValueError(f"joint table sums to {s!r}, not 1")
    return table
