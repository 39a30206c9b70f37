"""Input validation helpers shared by all estimators and scoring functions."""

import numpy as np


def as_float_matrix(X, name="X", allow_empty=False):
    """Coerce to a 2-D float64 array.

    Raises ValueError on wrong rank or (unless allow_empty) zero rows.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={X.ndim}")
    if not allow_empty and X.shape[0] == 0:
        raise ValueError(f"{name} has no rows")
    return X


def check_finite(arr, name="array"):
    """Raise ValueError if arr contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_dim(a, b, name_a="first", name_b="second"):
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"dimension mismatch: {name_a} has dim {a.shape[-1]}, "
            f"{name_b} has dim {b.shape[-1]}"
        )


def check_fitted(estimator, attr):
    if not hasattr(estimator, attr):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )


def as_rng(seed):
    """Accept an int seed, a SeedSequence-style list, or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
