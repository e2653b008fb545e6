"""Estimator-style wrappers around the functional optimizers.

Each optimizer is a scikit-learn ``BaseEstimator`` whose ``fit`` takes a
:class:`~smvr.core.CompositionProblem`; hyperparameters live in the
constructor so ``get_params``/``set_params``/``clone`` work as usual.
"""

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algorithms import adaptive_smvr_run, smvr_run, stagewise_run
from .baselines import nested_sgd_run, scsc_style_run
from .core import CompositionProblem, evaluate_exact, gradient_exact
from .exceptions import ContractViolation
from .schedules import ConstantSchedule, SmvrSchedule, StageSchedule


class CompositionOptimizerMixin:
    """Shared ``fit`` bookkeeping.

    Fitted attributes
    -----------------
    coef_ : ndarray of shape (d0,)
        Returned iterate (uniformly drawn for the SMVR family).
    w_final_ : ndarray of shape (d0,)
        Last iterate.
    stack_ : EstimatorStack or None
    trace_ : RunTrace
    tau_ : int
    n_samples_seen_ : int
        Oracle calls spent (value plus Jacobian).
    """

    def _run(self, problem):
        raise NotImplementedError

    def fit(self, problem, y=None):
        if not isinstance(problem, CompositionProblem):
            raise ContractViolation(f"fit expects a CompositionProblem, got {type(problem).__name__}")
        res = self._run(problem)
        self.coef_ = res.w
        self.w_final_ = res.w_final
        self.stack_ = res.stack
        self.trace_ = res.trace
        self.tau_ = res.tau
        self.n_samples_seen_ = res.trace.value_evals + res.trace.jacobian_evals
        self.n_features_in_ = problem.dim
        return self

    def objective(self, problem):
        """Full-batch objective at ``coef_``."""
        check_is_fitted(self, "coef_")
        return evaluate_exact(problem, self.coef_)

    def gradient(self, problem):
        check_is_fitted(self, "coef_")
        return gradient_exact(problem, self.coef_)

    def score(self, problem, y=None):
        """Negative objective, so larger is better."""
        return -self.objective(problem)


def _schedule(kind, eta, beta, a):
    if kind == "practical":
        return SmvrSchedule.practical(eta, beta, a)
    if kind == "constant":
        return ConstantSchedule(eta, beta)
    raise ContractViolation(f"schedule must be 'practical' or 'constant', got {kind!r}")


class SMVR(CompositionOptimizerMixin, BaseEstimator):
    """Nested STORM estimators with a descent step on the assembled gradient.

    Parameters
    ----------
    eta : float
        Initial step size.
    beta : float
        First momentum weight; with ``schedule="constant"`` the fixed weight.
    a : float
        Offset of the decreasing schedule, at least 2.
    schedule : {"practical", "constant"}
    max_iter : int
    batch_size : int
    radius : float, optional
        Jacobian projection radius (defaults to the problem's ``L_f``).
    trace_stride : int, optional
    random_state : int, Generator or None
    """

    def __init__(self, eta=0.1, beta=0.5, a=2.0, schedule="practical", max_iter=1000,
                 batch_size=1, radius=None, trace_stride=None, random_state=None):
        self.eta = eta
        self.beta = beta
        self.a = a
        self.schedule = schedule
        self.max_iter = max_iter
        self.batch_size = batch_size
        self.radius = radius
        self.trace_stride = trace_stride
        self.random_state = random_state

    def _run(self, problem):
        return smvr_run(problem, _schedule(self.schedule, self.eta, self.beta, self.a),
                        self.max_iter, self.batch_size, self.random_state, self.trace_stride,
                        self.radius)


class AdaptiveSMVR(CompositionOptimizerMixin, BaseEstimator):
    """SMVR with an adaptive per-coordinate step (AdaGrad, Adam, AMSGrad or AdaBound)."""

    def __init__(self, scaler="adam", eta=0.1, beta=0.5, a=2.0, schedule="practical",
                 max_iter=1000, batch_size=1, delta=1e-3, beta_prime=0.1, c_l=None, c_u=None,
                 radius=None, trace_stride=None, random_state=None):
        self.scaler = scaler
        self.eta = eta
        self.beta = beta
        self.a = a
        self.schedule = schedule
        self.max_iter = max_iter
        self.batch_size = batch_size
        self.delta = delta
        self.beta_prime = beta_prime
        self.c_l = c_l
        self.c_u = c_u
        self.radius = radius
        self.trace_stride = trace_stride
        self.random_state = random_state

    def _run(self, problem):
        return adaptive_smvr_run(problem, _schedule(self.schedule, self.eta, self.beta, self.a),
                                 self.scaler, self.max_iter, self.batch_size, self.random_state,
                                 self.trace_stride, self.radius, self.delta, self.beta_prime,
                                 self.c_l, self.c_u)


class StagewiseSMVR(CompositionOptimizerMixin, BaseEstimator):
    """Stage-wise restarted SMVR for PL / strongly convex objectives.

    Stage ``s`` runs ``T_1 rho^(s-1)`` iterations with momentum
    ``beta_1 / rho^(s-1)`` and step ``sqrt(beta_s / c)``.
    """

    def __init__(self, beta_1=0.5, T_1=100, c=50.0, rho=2.0, n_stages=5, batch_size=1,
                 radius=None, smoothness=None, check_step_size=True, trace_stride=None,
                 random_state=None):
        self.beta_1 = beta_1
        self.T_1 = T_1
        self.c = c
        self.rho = rho
        self.n_stages = n_stages
        self.batch_size = batch_size
        self.radius = radius
        self.smoothness = smoothness
        self.check_step_size = check_step_size
        self.trace_stride = trace_stride
        self.random_state = random_state

    def _run(self, problem):
        stages = StageSchedule(self.beta_1, self.T_1, self.c, self.rho, self.n_stages)
        return stagewise_run(problem, stages, self.batch_size, self.random_state,
                             self.trace_stride, self.radius, self.smoothness, self.check_step_size)


class NestedSGD(CompositionOptimizerMixin, BaseEstimator):
    """Plug-in stochastic chain rule (biased for curved outer levels)."""

    def __init__(self, eta=0.1, a=2.0, schedule="practical", max_iter=1000, batch_size=1,
                 trace_stride=None, random_state=None):
        self.eta = eta
        self.a = a
        self.schedule = schedule
        self.max_iter = max_iter
        self.batch_size = batch_size
        self.trace_stride = trace_stride
        self.random_state = random_state

    def _run(self, problem):
        return nested_sgd_run(problem, _schedule(self.schedule, self.eta, 1.0, self.a),
                              self.max_iter, self.batch_size, self.random_state, self.trace_stride)


class SCSCStyle(CompositionOptimizerMixin, BaseEstimator):
    """Momentum-tracked level values with fresh Jacobians each iteration."""

    def __init__(self, eta=0.1, beta=0.5, a=2.0, schedule="practical", max_iter=1000,
                 batch_size=1, trace_stride=None, random_state=None):
        self.eta = eta
        self.beta = beta
        self.a = a
        self.schedule = schedule
        self.max_iter = max_iter
        self.batch_size = batch_size
        self.trace_stride = trace_stride
        self.random_state = random_state

    def _run(self, problem):
        return scsc_style_run(problem, _schedule(self.schedule, self.eta, self.beta, self.a),
                              self.max_iter, self.batch_size, self.random_state, self.trace_stride)
