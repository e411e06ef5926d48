"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_positions(x, name="positions"):
    """Validate an (N, 2) array of torus positions and return it as float64.

    Components must be finite and lie in [0, 1).  Accepts any array-like.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (N, 2), got {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} needs at least one particle")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise ValueError(f"{name} components must lie in [0, 1)")
    return arr


def check_finite_array(x, shape=None, name="array"):
    """Validate finiteness (and optionally shape) of an array-like."""
    arr = np.asarray(x, dtype=float)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_square_cost(cost, name="cost matrix"):
    """Validate a finite square (N, N) cost matrix."""
    arr = np.asarray(cost, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr
