"""Multi-level composition model.

A problem is an ordered stack of level functions ``f_1, ..., f_K`` with
``f_i : R^{d_{i-1}} -> R^{d_i}`` and ``d_K = 1``.  Each level exposes noisy
oracles driven by a :class:`LevelSample` and exact oracles that average over
the level's whole dataset.

Jacobians are stored transposed, shape ``(d_{i-1}, d_i)``, so the gradient of
the composition is the left-to-right product ``J_1 @ J_2 @ ... @ J_K``.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._validation import check_positive_int, check_random_state, check_vector
from .exceptions import ConfigurationError, DomainError


@dataclass(frozen=True)
class DimensionChain:
    """Dimensions ``d_0, ..., d_K`` of a composition, ending in 1."""

    dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 2:
            raise ConfigurationError("a dimension chain needs at least two entries (K >= 1)")
        if any(d < 1 for d in dims):
            raise ConfigurationError(f"dimensions must be positive, got {dims}")
        if dims[-1] != 1:
            raise ConfigurationError(f"the last dimension must be 1, got {dims[-1]}")
        object.__setattr__(self, "dims", dims)

    @property
    def depth(self):
        return len(self.dims) - 1


@dataclass(frozen=True)
class LevelConstants:
    """Declared regularity constants of a level.

    ``lipschitz`` bounds the value map (and is the projection radius for
    Jacobian estimates), ``jacobian_lipschitz`` bounds the Jacobian's
    variation, ``sigma_f`` / ``sigma_J`` bound the root-mean-square oracle
    noise and the ``ms_*`` fields are the mean-squared smoothness constants.
    Any field may be ``None`` when unknown.
    """

    lipschitz: Optional[float] = None
    jacobian_lipschitz: Optional[float] = None
    sigma_f: Optional[float] = None
    sigma_J: Optional[float] = None
    ms_lipschitz: Optional[float] = None
    ms_jacobian_lipschitz: Optional[float] = None


@dataclass(frozen=True, eq=False)
class LevelSample:
    """A draw consumed by one level in one iteration.

    ``indices`` is an index array into the level's dataset, a tuple of such
    arrays for grouped data, or ``None`` for a deterministic level.
    """

    indices: object
    batch_size: int

    def same_as(self, other):
        a, b = self.indices, other.indices
        if self.batch_size != other.batch_size:
            return False
        if a is None or b is None:
            return a is None and b is None
        if isinstance(a, tuple):
            return (isinstance(b, tuple) and len(a) == len(b)
                    and all(np.array_equal(x, y) for x, y in zip(a, b)))
        return np.array_equal(a, b)


def _uniform_indices(rng, n, batch_size):
    if batch_size > n:
        raise ConfigurationError(f"batch size {batch_size} exceeds dataset size {n}")
    if batch_size == 1:
        return rng.integers(n, size=1)
    return rng.choice(n, size=batch_size, replace=False)


class StochasticLevel(ABC):
    """One level ``f_i`` of a composition.

    Subclasses implement :meth:`_value` and :meth:`_jacobian`, which receive
    the sample's index payload or ``None`` for the full-dataset (exact) mean.
    ``n_data`` is the dataset size; ``None`` marks a deterministic level.
    """

    in_dim: int
    out_dim: int
    n_data: Optional[int] = None
    constants: LevelConstants = LevelConstants()

    @abstractmethod
    def _value(self, x, indices):
        """Batch-mean value at ``x``; shape ``(out_dim,)``."""

    @abstractmethod
    def _jacobian(self, x, indices):
        """Batch-mean transposed Jacobian at ``x``; shape ``(in_dim, out_dim)``."""

    def value(self, x, sample):
        return self._value(x, sample.indices)

    def jacobian(self, x, sample):
        return self._jacobian(x, sample.indices)

    def exact_value(self, x):
        return self._value(x, None)

    def exact_jacobian(self, x):
        return self._jacobian(x, None)

    def draw(self, rng, batch_size):
        if self.n_data is None:
            return LevelSample(None, batch_size)
        if self.n_data < 1:
            raise ConfigurationError("cannot sample from an empty dataset")
        return LevelSample(_uniform_indices(rng, self.n_data, batch_size), batch_size)


class FunctionLevel(StochasticLevel):
    """Level built from plain callables ``value_fn(x, idx)`` and ``jacobian_fn(x, idx)``.

    ``idx`` is an index array or ``None`` (exact).  Mostly useful for tests and
    quick experiments; callables must average over ``idx`` themselves.
    """

    def __init__(self, in_dim, out_dim, value_fn, jacobian_fn, n_data=None,
                 constants=LevelConstants()):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.value_fn = value_fn
        self.jacobian_fn = jacobian_fn
        self.n_data = n_data
        self.constants = constants

    def _value(self, x, indices):
        return np.asarray(self.value_fn(x, indices), dtype=float).reshape(self.out_dim)

    def _jacobian(self, x, indices):
        return np.asarray(self.jacobian_fn(x, indices), dtype=float).reshape(
            self.in_dim, self.out_dim)


def check_finite(arr, level, what="value"):
    # a finite sum implies finite entries; only fall back to the full scan otherwise
    if not math.isfinite(arr.sum()) and not np.isfinite(arr).all():
        raise DomainError(f"non-finite {what}", level=level)
    return arr


class CompositionProblem:
    """An ordered stack of levels plus an initial point.

    Instances are treated as immutable once built.  ``certificate`` carries
    optional known facts about the optimum (see :mod:`smvr.problems`).
    """

    def __init__(self, levels: Sequence[StochasticLevel], w0, name="problem", certificate=None):
        levels = tuple(levels)
        if not levels:
            raise ConfigurationError("a composition needs at least one level")
        dims = [levels[0].in_dim]
        for i, level in enumerate(levels):
            if level.in_dim != dims[-1]:
                raise ConfigurationError(
                    f"level {i} expects input dimension {level.in_dim}, "
                    f"previous level produces {dims[-1]}")
            dims.append(level.out_dim)
        self.chain = DimensionChain(tuple(dims))
        self.levels = levels
        self.w0 = check_vector(w0, dims[0], "initial point")
        self.name = name
        self.certificate = certificate
        try:
            evaluate_exact(self, self.w0)
        except DomainError as exc:
            raise ConfigurationError(f"objective is not finite at the initial point ({exc})") from exc

    @property
    def depth(self):
        return len(self.levels)

    @property
    def dim(self):
        return self.chain.dims[0]

    def _shared(self, field):
        values = [getattr(level.constants, field) for level in self.levels]
        if any(v is None for v in values):
            raise ConfigurationError(f"not every level declares {field}")
        return float(max(values))

    @property
    def lipschitz(self):
        """Shared value-Lipschitz constant ``L_f`` (max over levels)."""
        return self._shared("lipschitz")

    @property
    def jacobian_lipschitz(self):
        return self._shared("jacobian_lipschitz")

    def constant(self, field):
        return self._shared(field)

    def __repr__(self):
        return f"CompositionProblem(name={self.name!r}, dims={self.chain.dims})"


def forward_exact(problem, w):
    """Exact forward pass; returns ``[w, f_1(w), f_2(f_1(w)), ...]``."""
    x = check_vector(w, problem.dim, "w")
    outs = [x]
    for i, level in enumerate(problem.levels):
        x = check_finite(level.exact_value(x), i)
        outs.append(x)
    return outs


def evaluate_exact(problem, w):
    """Full-batch objective ``f_K(...f_1(w))``."""
    return float(forward_exact(problem, w)[-1][0])


def gradient_exact(problem, w):
    """Full-batch gradient: product of exact transposed Jacobians along the forward pass."""
    outs = forward_exact(problem, w)
    g = None
    for i, level in enumerate(problem.levels):
        jac = check_finite(level.exact_jacobian(outs[i]), i, "jacobian")
        g = jac if g is None else g @ jac
    return g.reshape(problem.dim)


def smoothness_constant(problem):
    """``L_F = L_f^(2K-1) L_J sum_{i=1..K} L_f^(-i)`` with shared constants."""
    lf = problem.lipschitz
    lj = problem.jacobian_lipschitz
    k = problem.depth
    return lf ** (2 * k - 1) * lj * sum(lf ** -i for i in range(1, k + 1))


def draw_samples(problem, batch_size, rng):
    """One independent :class:`LevelSample` per level."""
    batch_size = check_positive_int(batch_size, "batch_size")
    rng = check_random_state(rng)
    return [level.draw(rng, batch_size) for level in problem.levels]

