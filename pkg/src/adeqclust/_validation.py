"""Input validation and RNG helpers shared by the estimators."""

import numbers

import numpy as np
from sklearn.utils import check_array


class DegenerateError(ValueError):
    """Raised when a model or cluster has collapsed and cannot be evaluated."""


def check_data(X, *, min_rows=1):
    """Validate a data matrix and return it as a C-contiguous float64 array."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True,
                    ensure_min_samples=min_rows, order="C")
    return X


def seed_sequence(seed, *key):
    """Deterministic child stream for task ``key`` of master ``seed``."""
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
    elif seed is None:
        entropy = np.random.SeedSequence().entropy
    elif isinstance(seed, numbers.Integral):
        entropy = int(seed)
    else:
        raise TypeError(f"seed must be an int or SeedSequence, got {type(seed).__name__}")
    return np.random.SeedSequence(entropy, spawn_key=tuple(int(k) for k in key))


def task_rng(seed, *key):
    return np.random.default_rng(seed_sequence(seed, *key))


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
