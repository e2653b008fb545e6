"""Reference optimizers for comparison traces.

``nested_sgd_run`` is the biased plug-in method: a fresh noisy forward pass,
fresh Jacobians at the noisy points, chain rule, descent.

``scsc_style_run`` tracks level values with the same momentum-corrected
recursion SMVR uses for values but takes fresh, unprojected Jacobians each
iteration.  It is a reconstruction from a one-line description of SCSC, not a
port of that method.
"""

import numpy as np

from ._validation import check_positive_int, check_random_state
from .algorithms import _seed_label
from .core import check_finite, draw_samples
from .estimators import storm_value_update
from .exceptions import DomainError
from .trace import RunResult, RunTrace, default_stride, should_record


def _chain(jacobians):
    g = jacobians[0]
    for j in jacobians[1:]:
        g = g @ j
    return g[:, 0]


def _setup(problem, T, batch_size, rng, trace_stride):
    seed = _seed_label(rng)
    rng = check_random_state(rng)
    T = check_positive_int(T, "T")
    batch_size = check_positive_int(batch_size, "batch_size")
    stride = default_stride(T) if trace_stride is None else check_positive_int(trace_stride, "trace_stride")
    return seed, rng, T, batch_size, stride


def nested_sgd_run(problem, schedule, T, batch_size=1, rng=None, trace_stride=None):
    """Plug-in stochastic chain rule with no estimator memory.

    ``schedule`` only needs an ``eta(t)`` method.  Returns a
    :class:`RunResult` whose ``w`` is the last iterate.
    """
    seed, rng, T, batch_size, stride = _setup(problem, T, batch_size, rng, trace_stride)
    trace = RunTrace(algorithm="nested_sgd", seed=seed)
    per_iter = problem.depth * batch_size
    w = problem.w0.copy()
    n_val = n_jac = 0
    for t in range(1, T + 1):
        try:
            samples = draw_samples(problem, batch_size, rng)
            x = w
            jacobians = []
            for i, (level, sample) in enumerate(zip(problem.levels, samples)):
                jacobians.append(check_finite(level.jacobian(x, sample), i, "jacobian"))
                x = check_finite(level.value(x, sample), i)
            n_val += per_iter
            n_jac += per_iter
            eta = schedule.eta(t)
            if should_record(t, T, stride):
                trace.record(problem, w, t, n_val + n_jac, eta, 1.0)
            w = w - eta * _chain(jacobians)
        except DomainError as exc:
            exc.iteration = t
            raise
    trace.value_evals = n_val
    trace.jacobian_evals = n_jac
    return RunResult(w, None, trace, w, T)


def scsc_style_run(problem, schedule, T, batch_size=1, rng=None, trace_stride=None):
    """Momentum-corrected value tracking with fresh Jacobians at the tracked values.

    ``schedule`` supplies ``eta(t)`` and ``beta(t)``.  With ``beta == 1`` the
    iterates coincide with :func:`nested_sgd_run` on the same seed.
    """
    seed, rng, T, batch_size, stride = _setup(problem, T, batch_size, rng, trace_stride)
    trace = RunTrace(algorithm="scsc_style", seed=seed)
    K = problem.depth
    w = problem.w0.copy()
    w_prev = None
    u_prev = None
    n_val = n_jac = 0
    for t in range(1, T + 1):
        try:
            samples = draw_samples(problem, batch_size, rng)
            beta = schedule.beta(t) if t > 1 else 1.0
            x_new, x_old = w, w_prev
            u = []
            jacobians = []
            for i, (level, sample) in enumerate(zip(problem.levels, samples)):
                jacobians.append(check_finite(level.jacobian(x_new, sample), i, "jacobian"))
                f_new = check_finite(level.value(x_new, sample), i)
                if u_prev is None:
                    u_i = f_new
                else:
                    f_old = check_finite(level.value(x_old, sample), i)
                    u_i = storm_value_update(u_prev[i], f_new, f_old, beta)
                    x_old = u_prev[i]
                u.append(u_i)
                x_new = u_i
            n_val += (K if u_prev is None else 2 * K) * batch_size
            n_jac += K * batch_size
            eta = schedule.eta(t)
            if should_record(t, T, stride):
                trace.record(problem, w, t, n_val + n_jac, eta, beta)
            w_prev, u_prev = w, u
            w = w - eta * _chain(jacobians)
        except DomainError as exc:
            exc.iteration = t
            raise
    trace.value_evals = n_val
    trace.jacobian_evals = n_jac
    return RunResult(w, None, trace, w, T)


def plugin_gradient(problem, w, samples):
    """Single plug-in gradient estimate at ``w`` (the nested SGD direction)."""
    x = np.asarray(w, dtype=float)
    jacobians = []
    for level, sample in zip(problem.levels, samples):
        jacobians.append(level.jacobian(x, sample))
        x = level.value(x, sample)
    return _chain(jacobians)
