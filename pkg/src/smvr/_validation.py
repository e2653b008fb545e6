"""Small input-validation helpers shared by the functional and estimator APIs."""

import numbers

import numpy as np

from .exceptions import ContractViolation


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`.

    A Generator is returned unchanged so callers can thread one stream
    through several runs.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ContractViolation(f"cannot seed a Generator from {seed!r}")


def check_vector(x, dim=None, name="vector"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractViolation(f"{name} must be one-dimensional, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ContractViolation(f"{name} has dimension {x.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return x


def check_probability(beta, name="beta"):
    if not (0.0 <= beta <= 1.0):
        raise ContractViolation(f"{name} must lie in [0, 1], got {beta!r}")
    return float(beta)


def check_positive(value, name):
    if not (value > 0) or not np.isfinite(value):
        raise ContractViolation(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_positive_int(value, name):
    if not isinstance(value, numbers.Integral) or value < 1:
        raise ContractViolation(f"{name} must be a positive integer, got {value!r}")
    return int(value)
