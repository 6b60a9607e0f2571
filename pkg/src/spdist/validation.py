"""Small input-validation helpers shared by the public entry points."""

import numbers

import numpy as np


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_interval(value, name, low, high, closed=(True, True)):
    """Validate ``low <(=) value <(=) high`` according to ``closed``."""
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    lo_ok = value >= low if closed[0] else value > low
    hi_ok = value <= high if closed[1] else value < high
    if not (lo_ok and hi_ok):
        left = "[" if closed[0] else "("
        right = "]" if closed[1] else ")"
        raise ValueError(f"{name} must lie in {left}{low}, {high}{right}, got {value!r}")
    return float(value)


def check_int(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")
    return int(value)


def check_vector(x, size, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != size:
        raise ValueError(f"{name} must be a vector of length {size}, got shape {x.shape}")
    return x


def check_agent_array(u, n_agents, name="u"):
    """Coerce per-agent signals to an ``(n_agents, a)`` float array."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[0] != n_agents:
        raise ValueError(f"{name} must have shape ({n_agents}, a), got {u.shape}")
    return u


def check_doubly_stochastic(W, atol=1e-12):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {W.shape}")
    if np.any(W < 0):
        raise ValueError("weight matrix has negative entries")
    if np.max(np.abs(W.sum(axis=1) - 1.0)) > atol:
        raise ValueError("weight matrix rows do not sum to 1")
    if np.max(np.abs(W.sum(axis=0) - 1.0)) > atol:
        raise ValueError("weight matrix columns do not sum to 1")
    return W
