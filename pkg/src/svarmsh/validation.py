"""Input validation helpers.

Small checks shared by the distribution samplers, the Gibbs blocks, and the
estimator facade. All return validated float64 arrays so callers can rely on
dtype and contiguity downstream.
"""

from __future__ import annotations

import numpy as np

SIMPLEX_TOL = 1e-12


def as_vector(x, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    return v


def as_matrix(x, name: str = "x") -> np.ndarray:
    m = np.asarray(x, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def check_positive(x, name: str = "parameter") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError(f"{name} must be finite and > 0, got {x!r}")
    return v


def check_simplex(x, name: str = "x", interior: bool = False) -> np.ndarray:
    """Validate a point on the probability simplex.

    With ``interior=True`` every coordinate must be strictly inside (0, 1),
    which is what the simplex log-densities require.
    """
    v = as_vector(x, name)
    if np.any(~np.isfinite(v)) or np.any(v < 0):
        raise ValueError(f"{name} must be finite and nonnegative")
    if abs(v.sum() - 1.0) > SIMPLEX_TOL * max(1, v.size):
        raise ValueError(f"{name} must sum to 1, got sum {v.sum()!r}")
    if interior and (np.any(v <= 0) or np.any(v >= 1)) and v.size > 1:
        raise ValueError(f"{name} must lie strictly inside the simplex")
    return v


def check_transition_matrix(p, name: str = "transition") -> np.ndarray:
    m = as_matrix(p, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if np.any(m < 0) or np.any(m > 1):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if np.any(np.abs(m.sum(axis=1) - 1.0) > SIMPLEX_TOL * max(1, m.shape[1])):
        raise ValueError(f"{name} rows must sum to 1")
    return m


def check_rng(rng) -> np.random.Generator:
    if not isinstance(rng, np.random.Generator):
        raise TypeError("rng must be a numpy.random.Generator (e.g. np.random.default_rng(seed))")
    return rng
