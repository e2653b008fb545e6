"""Nested STORM estimators for level values and projected Jacobians.

Every function here is pure: stacks are immutable values and updates return
new stacks.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_probability
from .core import check_finite
from .exceptions import ContractViolation


def project_ball(m, radius):
    """Radially scale ``m`` onto the Frobenius ball of the given radius."""
    if not radius > 0:
        raise ContractViolation(f"radius must be positive, got {radius!r}")
    m = np.asarray(m, dtype=float)
    norm = np.linalg.norm(m)
    if not np.isfinite(norm):
        raise ContractViolation("cannot project a non-finite matrix")
    if norm <= radius:
        return m
    return m * (radius / norm)


def storm_value_update(u_prev, f_new, f_old, beta):
    """``(1-b) u_prev + b f_new + (1-b)(f_new - f_old)``.

    ``f_new`` and ``f_old`` must come from the same sample evaluated at the
    current and previous inputs.
    """
    beta = check_probability(beta)
    return (1 - beta) * u_prev + beta * f_new + (1 - beta) * (f_new - f_old)


def storm_jacobian_update(v_prev, j_new, j_old, beta, radius):
    """Value recursion applied to Jacobians, followed by :func:`project_ball`."""
    if v_prev.shape != j_new.shape or j_new.shape != j_old.shape:
        raise ContractViolation(
            f"Jacobian shapes disagree: {v_prev.shape}, {j_new.shape}, {j_old.shape}")
    return project_ball(storm_value_update(v_prev, j_new, j_old, beta), radius)


@dataclass(frozen=True, eq=False)
class LevelEstimatorState:
    u: np.ndarray  # value estimate, shape (d_i,)
    v: np.ndarray  # transposed-Jacobian estimate, shape (d_{i-1}, d_i)


@dataclass(frozen=True, eq=False)
class EstimatorStack:
    """Per-level estimator states plus the point ``w`` they were built at (``u^0``)."""

    w: np.ndarray
    levels: tuple

    @property
    def depth(self):
        return len(self.levels)

    def inputs(self):
        """Level inputs ``u^0 = w, u^1, ..., u^{K-1}``."""
        return [self.w] + [s.u for s in self.levels[:-1]]

    def equals(self, other):
        """Bitwise equality of every array in both stacks."""
        if self.depth != other.depth or not np.array_equal(self.w, other.w):
            return False
        return all(np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
                   for a, b in zip(self.levels, other.levels))


def assemble_gradient(stack):
    """Left fold ``v^1 @ v^2 @ ... @ v^K`` returned as a flat vector."""
    g = stack.levels[0].v
    for state in stack.levels[1:]:
        if g.shape[1] != state.v.shape[0]:
            raise ContractViolation(
                f"cannot chain Jacobian estimates of shapes {g.shape} and {state.v.shape}")
        g = g @ state.v
    if g.shape[1] != 1:
        raise ContractViolation(f"gradient product has shape {g.shape}, expected (d, 1)")
    return g[:, 0]


def _radius(problem, radius):
    return problem.lipschitz if radius is None else radius


def init_stack(problem, w, samples, radius=None):
    """Plain forward pass through the noisy oracles, Jacobians projected."""
    radius = _radius(problem, radius)
    if len(samples) != problem.depth:
        raise ContractViolation(f"need {problem.depth} samples, got {len(samples)}")
    x = np.asarray(w, dtype=float)
    states = []
    for i, (level, sample) in enumerate(zip(problem.levels, samples)):
        u = check_finite(level.value(x, sample), i)
        v = project_ball(check_finite(level.jacobian(x, sample), i, "jacobian"), radius)
        states.append(LevelEstimatorState(u, v))
        x = u
    return EstimatorStack(np.array(w, dtype=float), tuple(states))


def advance_stack(stack, problem, w_new, samples, beta, radius=None):
    """One nested STORM step from ``stack`` to the new point ``w_new``.

    Level ``i`` evaluates its sample at both the new input ``u_t^{i-1}`` and
    the previous input ``u_{t-1}^{i-1}``.
    """
    radius = _radius(problem, radius)
    if len(samples) != problem.depth or stack.depth != problem.depth:
        raise ContractViolation("stack, problem and samples disagree on depth")
    x_new = np.asarray(w_new, dtype=float)
    x_old = stack.w
    states = []
    for i, (level, sample, prev) in enumerate(zip(problem.levels, samples, stack.levels)):
        f_new = check_finite(level.value(x_new, sample), i)
        f_old = check_finite(level.value(x_old, sample), i)
        j_new = check_finite(level.jacobian(x_new, sample), i, "jacobian")
        j_old = check_finite(level.jacobian(x_old, sample), i, "jacobian")
        u = storm_value_update(prev.u, f_new, f_old, beta)
        v = storm_jacobian_update(prev.v, j_new, j_old, beta, radius)
        states.append(LevelEstimatorState(u, v))
        x_old = prev.u
        x_new = u
    return EstimatorStack(np.array(w_new, dtype=float), tuple(states))
