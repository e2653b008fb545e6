"""Step-size / momentum schedules and adaptive per-coordinate scalers."""

from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from ._validation import check_positive, check_positive_int
from .core import smoothness_constant
from .exceptions import ConfigurationError, ContractViolation


@dataclass(frozen=True)
class SmvrSchedule:
    """Decreasing schedule ``eta_t = scale (a + t)^(-1/3)``, ``beta_t = c eta_{t-1}^2``.

    ``scale`` defaults to 1.  With ``allow_clamp`` a schedule whose first
    momentum weight exceeds one is accepted and ``beta_t`` is clamped to 1.
    """

    c: float
    a: float
    scale: float = 1.0
    allow_clamp: bool = False

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigurationError(f"c must be positive, got {self.c}")
        if not self.a >= 2:
            raise ConfigurationError(f"a must be at least 2, got {self.a}")
        if not self.scale > 0:
            raise ConfigurationError(f"scale must be positive, got {self.scale}")
        if self.c * self.eta(0) ** 2 > 1 and not self.allow_clamp:
            raise ConfigurationError(
                f"c * eta_0^2 = {self.c * self.eta(0) ** 2:.6g} > 1; momentum weight leaves [0, 1]")

    def eta(self, t):
        return self.scale * (self.a + t) ** (-1.0 / 3.0)

    def beta(self, t):
        return min(1.0, self.c * self.eta(t - 1) ** 2)

    @classmethod
    def practical(cls, eta0, beta1, a=2.0):
        """Schedule with ``eta_0 = eta0`` and ``beta_1 = beta1``."""
        check_positive(eta0, "eta0")
        if not 0 < beta1 <= 1:
            raise ConfigurationError(f"beta1 must lie in (0, 1], got {beta1}")
        return cls(c=beta1 / eta0 ** 2, a=a, scale=eta0 * a ** (1.0 / 3.0))

    @classmethod
    def theoretical(cls, l1):
        """Constants ``c = 10 L1^2`` and ``a = (20 L1^3)^(3/2)``."""
        if l1 < 1:
            raise ConfigurationError("L1 is at least 1 by definition")
        return cls(c=10.0 * l1 ** 2, a=(20.0 * l1 ** 3) ** 1.5)


@dataclass(frozen=True)
class ConstantSchedule:
    eta_value: float
    beta_value: float = 1.0

    def __post_init__(self):
        if not self.eta_value > 0:
            raise ConfigurationError(f"eta must be positive, got {self.eta_value}")
        if not 0 < self.beta_value <= 1:
            raise ConfigurationError(f"beta must lie in (0, 1], got {self.beta_value}")

    def eta(self, t):
        return self.eta_value

    def beta(self, t):
        return self.beta_value


def theory_constant_l1(problem):
    """The aggregate constant ``L_1`` built from the problem's declared constants.

    Uses the ``1 + 2K + 2K sigma_f^2`` factor in the last term (the larger of
    the two forms in circulation).
    """
    k = problem.depth
    lf = problem.lipschitz
    lj = problem.jacobian_lipschitz
    sf = problem.constant("sigma_f")
    sj = problem.constant("sigma_J")
    msf = problem.constant("ms_lipschitz")
    lF = smoothness_constant(problem)
    geo = sum((2 * msf ** 2) ** i for i in range(k))
    return max(1.0, k * lf ** (2 * (k - 1)), k * lF ** 2, 2 * k * (sj ** 2 + sf ** 2),
               2 * (lj ** 2 + lf ** 2) * (1 + 2 * k + 2 * k * sf ** 2) * geo)


@dataclass(frozen=True)
class StageSchedule:
    """Geometric restart schedule.

    Stage ``s`` (1-based) runs ``T_s = T_1 rho^(s-1)`` iterations with
    constant ``beta_s = beta_1 / rho^(s-1)`` and ``eta_s = sqrt(beta_s / c)``.
    ``explicit`` overrides the geometric rule with a tuple of ``(beta, T)``.
    """

    beta_1: float
    T_1: int
    c: float
    rho: float = 2.0
    n_stages: int = 4
    explicit: Optional[tuple] = None

    def __post_init__(self):
        if not 0 < self.beta_1 <= 1:
            raise ConfigurationError(f"beta_1 must lie in (0, 1], got {self.beta_1}")
        check_positive_int(self.T_1, "T_1")
        check_positive_int(self.n_stages, "n_stages")
        if not self.c > 0:
            raise ConfigurationError(f"c must be positive, got {self.c}")
        if not self.rho > 1:
            raise ConfigurationError(f"rho must exceed 1, got {self.rho}")
        for beta, _ in self.stages_beta_T():
            if not 0 < beta <= 1:
                raise ConfigurationError(f"stage momentum {beta} outside (0, 1]")

    def stages_beta_T(self):
        if self.explicit is not None:
            return [(float(b), int(t)) for b, t in self.explicit]
        return [(self.beta_1 / self.rho ** s, int(round(self.T_1 * self.rho ** s)))
                for s in range(self.n_stages)]

    def stages(self):
        """List of ``(beta_s, T_s, eta_s)``."""
        return [(b, t, float(np.sqrt(b / self.c))) for b, t in self.stages_beta_T()]

    def check_step_size(self, smoothness):
        """Require ``eta_s * L_F <= 1/2`` for every stage."""
        for s, (_, _, eta) in enumerate(self.stages(), start=1):
            if eta * smoothness > 0.5:
                raise ConfigurationError(
                    f"stage {s}: eta * L_F = {eta * smoothness:.4g} exceeds 1/2")

    @classmethod
    def theoretical(cls, l1, mu, delta_f, sigma_f, sigma_J, depth, n_stages):
        """Stage constants derived from the PL analysis (very conservative)."""
        l2 = 64.0 * l1 ** 2
        eps1 = 8.0 * l1 / mu
        beta1 = 1.0 / (2.0 * l1)
        t1 = max(4 * l1 * depth * (sigma_f ** 2 + sigma_J ** 2), 2 * np.sqrt(2 * l1) * delta_f)
        stages = [(beta1, int(np.ceil(t1)))]
        for s in range(2, n_stages + 1):
            eps_prev = eps1 / 2 ** (s - 2)
            beta = mu * eps_prev / l2
            ts = max(4 * l2 ** 1.5 / (mu * eps_prev), 4 * l2 / (mu ** 1.5 * np.sqrt(eps_prev)))
            stages.append((beta, int(np.ceil(ts))))
        return cls(beta_1=beta1, T_1=stages[0][1], c=16.0 * l1 ** 2,
                   n_stages=n_stages, explicit=tuple(stages))


SCALER_KINDS = ("adagrad", "adam", "amsgrad", "adabound")


@dataclass(frozen=True, eq=False)
class AdaptiveScaler:
    """Per-coordinate second-moment state ``h`` for adaptive steps.

    ``beta_prime`` is a constant or a callable of the iteration index.
    ``c_l <= c_u`` bound the AdaBound clamp range ``[1/c_u^2, 1/c_l^2]``.
    """

    kind: str
    delta: float = 1e-3
    beta_prime: Union[float, Callable] = 0.1
    c_l: Optional[float] = None
    c_u: Optional[float] = None
    h: Optional[np.ndarray] = None
    h_prime: Optional[np.ndarray] = None
    sq_sum: Optional[np.ndarray] = None
    count: int = 0

    def __post_init__(self):
        if self.kind not in SCALER_KINDS:
            raise ConfigurationError(f"unknown scaler kind {self.kind!r}; choose from {SCALER_KINDS}")
        if not self.delta > 0:
            raise ConfigurationError(f"delta must be positive, got {self.delta}")
        if self.kind == "adabound":
            if self.c_l is None or self.c_u is None or not 0 < self.c_l <= self.c_u:
                raise ConfigurationError("AdaBound needs 0 < c_l <= c_u")

    def momentum(self, t):
        bp = self.beta_prime(t) if callable(self.beta_prime) else self.beta_prime
        if not 0 <= bp <= 1:
            raise ContractViolation(f"beta' must lie in [0, 1], got {bp}")
        return bp

    def scale(self, v, eta):
        """Step ``eta * v / (sqrt(h) + delta)`` for the current state."""
        h = np.zeros_like(v) if self.h is None else self.h
        return eta * v / (np.sqrt(h) + self.delta)


def scaler_update(scaler, v, t):
    """Fold the gradient estimate ``v`` at iteration ``t`` into the scaler state."""
    v = np.asarray(v, dtype=float)
    if scaler.h is not None and scaler.h.shape != v.shape:
        raise ContractViolation(f"scaler has dimension {scaler.h.shape}, gradient {v.shape}")
    zeros = np.zeros_like(v)
    sq = v * v
    kind = scaler.kind
    if kind == "adagrad":
        sq_sum = (zeros if scaler.sq_sum is None else scaler.sq_sum) + sq
        count = scaler.count + 1
        return replace(scaler, h=sq_sum / count, sq_sum=sq_sum, count=count)
    bp = scaler.momentum(t)
    if kind == "adam":
        h_prev = zeros if scaler.h is None else scaler.h
        return replace(scaler, h=(1 - bp) * h_prev + bp * sq, count=scaler.count + 1)
    hp_prev = zeros if scaler.h_prime is None else scaler.h_prime
    h_prime = (1 - bp) * hp_prev + bp * sq
    if kind == "amsgrad":
        h_prev = zeros if scaler.h is None else scaler.h
        h = np.maximum(h_prev, h_prime)
    else:
        h = np.clip(h_prime, 1.0 / scaler.c_u ** 2, 1.0 / scaler.c_l ** 2)
    return replace(scaler, h=h, h_prime=h_prime, count=scaler.count + 1)
