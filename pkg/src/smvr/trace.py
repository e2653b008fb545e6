"""Run records for convergence analysis."""

from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .core import evaluate_exact, gradient_exact

FIELDS = ("iteration", "samples", "loss", "grad_norm", "eta", "beta")


@dataclass
class RunTrace:
    """Evaluated iterations of one optimizer run.

    ``samples`` is the cumulative number of datum evaluations (value plus
    Jacobian oracle calls, each counted ``batch_size`` times) spent up to and
    including the recorded iteration.
    """

    algorithm: str = ""
    seed: Optional[int] = None
    iteration: List[int] = field(default_factory=list)
    samples: List[int] = field(default_factory=list)
    loss: List[float] = field(default_factory=list)
    grad_norm: List[float] = field(default_factory=list)
    eta: List[float] = field(default_factory=list)
    beta: List[float] = field(default_factory=list)
    stage_starts: List[int] = field(default_factory=list, compare=False)
    stage_outputs: list = field(default_factory=list, compare=False)
    value_evals: int = field(default=0, compare=False)
    jacobian_evals: int = field(default=0, compare=False)

    def __len__(self):
        return len(self.iteration)

    def append(self, iteration, samples, loss, grad_norm, eta, beta):
        self.iteration.append(int(iteration))
        self.samples.append(int(samples))
        self.loss.append(float(loss))
        self.grad_norm.append(float(grad_norm))
        self.eta.append(float(eta))
        self.beta.append(float(beta))

    def record(self, problem, w, iteration, samples, eta, beta):
        """Append full-batch loss and gradient norm at ``w``."""
        self.append(iteration, samples, evaluate_exact(problem, w),
                    np.linalg.norm(gradient_exact(problem, w)), eta, beta)

    def column(self, name):
        return np.asarray(getattr(self, name))

    def extend(self, other, iteration_offset=0, sample_offset=0):
        for i, s, lo, g, e, b in zip(other.iteration, other.samples, other.loss,
                                      other.grad_norm, other.eta, other.beta):
            self.append(i + iteration_offset, s + sample_offset, lo, g, e, b)


class RunResult(NamedTuple):
    """Output of an optimizer run.

    ``w`` is the contract-bearing output (the uniformly drawn iterate for the
    SMVR family, the last iterate for the baselines); ``w_final`` is always
    the last iterate and ``stack`` the estimator stack paired with ``w``.
    """

    w: np.ndarray
    stack: object
    trace: RunTrace
    w_final: np.ndarray
    tau: int


def default_stride(T):
    return max(1, T // 500)


def should_record(t, T, stride):
    return (t - 1) % stride == 0 or t == T
