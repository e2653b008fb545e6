"""SMVR, its stage-wise restart variant and the adaptive-step variant."""

import numbers

import numpy as np

from ._validation import check_positive_int, check_random_state
from .core import draw_samples, smoothness_constant
from .estimators import advance_stack, assemble_gradient, init_stack
from .exceptions import ConfigurationError, ContractViolation, DomainError, InsufficientDataError
from .schedules import AdaptiveScaler, ConstantSchedule, scaler_update
from .trace import RunResult, RunTrace, default_stride, should_record


def _seed_label(rng):
    return int(rng) if isinstance(rng, numbers.Integral) else None


def _smvr_loop(problem, schedule, T, batch_size, rng, trace_stride, radius,
               init=None, scaler=None, callback=None, algorithm="smvr"):
    seed = _seed_label(rng)
    rng = check_random_state(rng)
    T = check_positive_int(T, "T")
    batch_size = check_positive_int(batch_size, "batch_size")
    stride = default_stride(T) if trace_stride is None else check_positive_int(trace_stride, "trace_stride")
    radius = problem.lipschitz if radius is None else radius
    per_iter = 2 * problem.depth * batch_size
    trace = RunTrace(algorithm=algorithm, seed=seed)

    tau = int(rng.integers(1, T + 1))
    if init is None:
        w = problem.w0.copy()
        stack = init_stack(problem, w, draw_samples(problem, batch_size, rng), radius)
        n_val = n_jac = problem.depth * batch_size
    else:
        w, stack = init
        w = np.array(w, dtype=float)
        if not np.array_equal(w, stack.w):
            raise ContractViolation("warm-start point and estimator stack disagree")
        n_val = n_jac = 0

    beta = schedule.beta(1)
    chosen = None
    for t in range(1, T + 1):
        try:
            if t > 1:
                beta = schedule.beta(t)
                stack = advance_stack(stack, problem, w,
                                      draw_samples(problem, batch_size, rng), beta, radius)
                n_val += per_iter
                n_jac += per_iter
            eta = schedule.eta(t)
            if should_record(t, T, stride):
                trace.record(problem, w, t, n_val + n_jac, eta, beta)
            if t == tau:
                chosen = (w, stack)
            v = assemble_gradient(stack)
            if scaler is None:
                step = eta * v
            else:
                scaler = scaler_update(scaler, v, t)
                step = scaler.scale(v, eta)
            if callback is not None:
                callback(t, w, stack, v)
            w = w - step
        except DomainError as exc:
            exc.iteration = t
            raise
    trace.value_evals = n_val
    trace.jacobian_evals = n_jac
    return RunResult(chosen[0], chosen[1], trace, w, tau)


def smvr_run(problem, schedule, T, batch_size=1, rng=None, trace_stride=None,
             radius=None, init=None, callback=None):
    """Run SMVR for ``T`` iterations.

    Parameters
    ----------
    problem : CompositionProblem
    schedule : SmvrSchedule or ConstantSchedule
        Supplies ``eta(t)`` and ``beta(t)``.
    T : int
        Number of iterations.
    batch_size : int
        Datums per level and iteration.
    rng : int, Generator or None
        Source of randomness; the returned iterate index is drawn first.
    trace_stride : int, optional
        Evaluate full-batch loss and gradient every ``trace_stride``
        iterations (default ``max(1, T // 500)``); the last iteration is
        always recorded.
    radius : float, optional
        Projection radius for Jacobian estimates, default ``problem.lipschitz``.
    init : (w, EstimatorStack), optional
        Warm start; the stack is used as is, without re-sampling.
    callback : callable, optional
        ``callback(t, w_t, stack_t, v_t)`` before each descent step.

    Returns
    -------
    RunResult
        ``w`` and ``stack`` belong to an iterate drawn uniformly from
        ``1..T``; ``w_final`` is ``w_{T+1}``.
    """
    return _smvr_loop(problem, schedule, T, batch_size, rng, trace_stride, radius,
                      init=init, callback=callback, algorithm="smvr")


def adaptive_smvr_run(problem, schedule, scaler="adam", T=1000, batch_size=1, rng=None,
                      trace_stride=None, radius=None, delta=1e-3, beta_prime=0.1,
                      c_l=None, c_u=None, callback=None):
    """SMVR with the descent step divided coordinatewise by ``sqrt(h_t) + delta``.

    ``scaler`` is a kind name (``adagrad``, ``adam``, ``amsgrad``,
    ``adabound``) or a ready :class:`AdaptiveScaler`, in which case the
    ``delta``/``beta_prime``/``c_*`` arguments are ignored.
    """
    if isinstance(scaler, str):
        scaler = AdaptiveScaler(kind=scaler, delta=delta, beta_prime=beta_prime, c_l=c_l, c_u=c_u)
    return _smvr_loop(problem, schedule, T, batch_size, rng, trace_stride, radius,
                      scaler=scaler, callback=callback, algorithm=f"adaptive_{scaler.kind}")


def _drop_first(trace):
    out = RunTrace(algorithm=trace.algorithm, seed=trace.seed)
    out.extend(trace)
    for name in ("iteration", "samples", "loss", "grad_norm", "eta", "beta"):
        del getattr(out, name)[0]
    return out


def stagewise_run(problem, stage_schedule, batch_size=1, rng=None, trace_stride=None,
                  radius=None, smoothness=None, check_step_size=True):
    """Restart SMVR stage by stage with constant ``eta_s, beta_s`` per stage.

    Each stage warm-starts from the previous stage's returned iterate and
    estimator stack.  The step condition ``eta_s L_F <= 1/2`` is checked
    against ``smoothness`` (default: the problem certificate's bound when
    present, else :func:`smoothness_constant`).

    The returned trace carries ``stage_starts`` (global iteration index of
    each stage's first iteration) and ``stage_outputs`` (each stage's
    returned iterate).  The first iteration of a warm-started stage consumes
    no samples and is not recorded.
    """
    if check_step_size:
        if smoothness is None:
            cert = problem.certificate
            smoothness = getattr(cert, "smoothness", None) or smoothness_constant(problem)
        stage_schedule.check_step_size(smoothness)
    seed = _seed_label(rng)
    rng = check_random_state(rng)
    trace = RunTrace(algorithm="stagewise_smvr", seed=seed)
    init = None
    it_offset = sample_offset = 0
    n_val = n_jac = 0
    res = None
    for beta, T_s, eta in stage_schedule.stages():
        res = _smvr_loop(problem, ConstantSchedule(eta, beta), T_s, batch_size, rng,
                         trace_stride, radius, init=init, algorithm="stagewise_smvr")
        trace.stage_starts.append(it_offset + 1)
        stage_trace = res.trace
        if init is not None and stage_trace.samples and stage_trace.samples[0] == 0:
            # the warm-start iterate costs no samples; keep the sample axis strictly increasing
            stage_trace = _drop_first(stage_trace)
        trace.extend(stage_trace, it_offset, sample_offset)
        trace.stage_outputs.append(res.w.copy())
        it_offset += T_s
        n_val += res.trace.value_evals
        n_jac += res.trace.jacobian_evals
        sample_offset = n_val + n_jac
        init = (res.w, res.stack)
    trace.value_evals = n_val
    trace.jacobian_evals = n_jac
    return RunResult(res.w, res.stack, trace, res.w_final, res.tau)


def estimate_rate_exponent(trace, window=None, smoothing="running_mean"):
    """Log-log slope of the gradient-norm curve against the iteration index.

    With ``smoothing="running_mean"`` the curve is the running mean of the
    recorded gradient norms; ``"none"`` uses the raw values.  ``window`` is an
    inclusive ``(lo, hi)`` iteration range.
    """
    t = np.asarray(trace.iteration, dtype=float)
    g = np.asarray(trace.grad_norm, dtype=float)
    if smoothing == "running_mean":
        g = np.cumsum(g) / np.arange(1, len(g) + 1)
    elif smoothing != "none":
        raise ConfigurationError(f"unknown smoothing {smoothing!r}")
    mask = np.ones_like(t, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    mask &= g > 0
    if mask.sum() < 10:
        raise InsufficientDataError(f"need at least 10 positive points in the window, got {mask.sum()}")
    slope, _ = np.polyfit(np.log(t[mask]), np.log(g[mask]), 1)
    return float(slope)
