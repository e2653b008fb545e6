"""Benchmark compositions: mean-deviation portfolio, hierarchical tilted ERM,
and a synthetic affine/quadratic stack with a known optimum."""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from ._validation import check_random_state
from .core import CompositionProblem, LevelConstants, LevelSample, StochasticLevel
from .exceptions import ConfigurationError, DomainError

# ---------------------------------------------------------------------------
# synthetic affine stack with quadratic top


@dataclass(frozen=True, eq=False)
class SyntheticCertificate:
    """Known facts about a synthetic problem.

    ``mu`` is the strong-convexity modulus when the composed linear map has
    full column rank, otherwise the PL constant (smallest positive
    eigenvalue of the Hessian).  ``smoothness`` is the largest eigenvalue.
    """

    w_star: np.ndarray
    f_star: float
    mu: float
    smoothness: float
    strongly_convex: bool
    hessian: np.ndarray


class AffineLevel(StochasticLevel):
    """``x -> A x + b`` plus zero-mean noise drawn from a finite pool."""

    def __init__(self, A, b, value_noise=None, jacobian_noise=None):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.out_dim, self.in_dim = self.A.shape
        self.At = np.ascontiguousarray(self.A.T)
        self.value_noise = value_noise
        self.jacobian_noise = jacobian_noise
        self.n_data = None if value_noise is None else len(value_noise)
        self.constants = LevelConstants(
            lipschitz=float(np.linalg.norm(self.A)),
            jacobian_lipschitz=0.0,
            sigma_f=_rms(value_noise),
            sigma_J=_rms(jacobian_noise),
            ms_lipschitz=float(np.linalg.norm(self.A, 2)),
            ms_jacobian_lipschitz=0.0,
        )

    def _value(self, x, indices):
        out = self.A @ x + self.b
        if indices is not None:
            out = out + _pool_mean(self.value_noise, indices)
        return out

    def _jacobian(self, x, indices):
        if indices is None:
            return self.At
        return self.At + _pool_mean(self.jacobian_noise, indices)


class QuadraticTopLevel(StochasticLevel):
    """``z -> 0.5 ||z - z*||^2`` plus pooled zero-mean noise."""

    def __init__(self, z_star, value_noise=None, jacobian_noise=None, lipschitz=None):
        self.z_star = np.asarray(z_star, dtype=float)
        self.in_dim = self.z_star.shape[0]
        self.out_dim = 1
        self.value_noise = value_noise
        self.jacobian_noise = jacobian_noise
        self.n_data = None if value_noise is None else len(value_noise)
        self.constants = LevelConstants(
            lipschitz=lipschitz,
            jacobian_lipschitz=1.0,
            sigma_f=_rms(value_noise),
            sigma_J=_rms(jacobian_noise),
            ms_lipschitz=lipschitz,
            ms_jacobian_lipschitz=1.0,
        )

    def _value(self, z, indices):
        r = z - self.z_star
        out = np.array([0.5 * (r @ r)])
        if indices is not None:
            out = out + _pool_mean(self.value_noise, indices)
        return out

    def _jacobian(self, z, indices):
        out = (z - self.z_star)[:, None]
        if indices is not None:
            out = out + _pool_mean(self.jacobian_noise, indices)
        return out


def _pool_mean(pool, indices):
    # single draws are the hot path; skip the reduction
    if len(indices) == 1:
        return pool[indices[0]]
    return pool[indices].mean(axis=0)


def _rms(pool):
    if pool is None:
        return 0.0
    flat = pool.reshape(len(pool), -1)
    return float(np.sqrt(np.mean(np.sum(flat ** 2, axis=1))))


def _centered(rng, shape, sigma):
    pool = rng.normal(scale=sigma, size=shape)
    return pool - pool.mean(axis=0)


def _random_matrix(rng, rows, cols, singular_range):
    k = min(rows, cols)
    U, _ = np.linalg.qr(rng.normal(size=(rows, k)))
    V, _ = np.linalg.qr(rng.normal(size=(cols, k)))
    s = rng.uniform(*singular_range, size=k)
    return (U * s) @ V.T


def build_synthetic(K=3, dims=(8, 6, 4, 1), sigma_f=0.1, sigma_J=0.1, seed=0,
                    pool_size=1000, matrices=None, offsets=None, w_star=None, w0=None,
                    singular_range=(0.7, 1.3), max_retries=10):
    """Affine levels ``A_i x + b_i`` topped by ``0.5 ||z - z*||^2``.

    Every entry of every noise vector/matrix is Gaussian with standard
    deviation ``sigma_f`` (values) or ``sigma_J`` (Jacobians), drawn once
    into a pool of ``pool_size`` centred draws; sampling picks pool rows.
    ``z*`` is placed so that ``w*`` (random unless given) is a minimiser with
    ``F* = 0``.  Returns a :class:`CompositionProblem` whose ``certificate``
    is a :class:`SyntheticCertificate`.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != K + 1 or dims[-1] != 1:
        raise ConfigurationError(f"dims {dims} do not describe a depth-{K} chain ending in 1")
    rng = check_random_state(seed)
    noisy = sigma_f > 0 or sigma_J > 0

    for _ in range(max_retries):
        if matrices is None:
            As = [_random_matrix(rng, dims[i + 1], dims[i], singular_range) for i in range(K - 1)]
        else:
            As = [np.asarray(A, dtype=float) for A in matrices]
        if all(np.linalg.matrix_rank(A) == min(A.shape) for A in As) or matrices is not None:
            break
    else:
        raise ConfigurationError("could not draw full-rank level matrices")
    if len(As) != K - 1 or any(A.shape != (dims[i + 1], dims[i]) for i, A in enumerate(As)):
        raise ConfigurationError("level matrices do not match the dimension chain")
    bs = ([rng.normal(size=dims[i + 1]) for i in range(K - 1)] if offsets is None
          else [np.asarray(b, dtype=float) for b in offsets])

    M = np.eye(dims[0])
    m = np.zeros(dims[0])
    for A, b in zip(As, bs):
        M, m = A @ M, A @ m + b
    w_star = rng.normal(size=dims[0]) if w_star is None else np.asarray(w_star, dtype=float)
    z_star = M @ w_star + m
    if w0 is None:
        w0 = w_star + rng.normal(size=dims[0])
    w0 = np.asarray(w0, dtype=float)

    H = M.T @ M
    eig = np.linalg.eigvalsh(H)
    tol = eig[-1] * 1e-10 * dims[0]
    strongly_convex = eig[0] > tol
    mu = float(eig[0] if strongly_convex else eig[eig > tol][0])
    r0 = M @ (w0 - w_star)
    top_bound = 2.0 * float(np.linalg.norm(r0)) + 1.0

    def pools(out_shape):
        if not noisy:
            return None, None
        return (_centered(rng, (pool_size,) + out_shape[0], sigma_f),
                _centered(rng, (pool_size,) + out_shape[1], sigma_J))

    levels = []
    for i, (A, b) in enumerate(zip(As, bs)):
        vn, jn = pools(((dims[i + 1],), (dims[i], dims[i + 1])))
        levels.append(AffineLevel(A, b, vn, jn))
    vn, jn = pools(((1,), (dims[K - 1], 1)))
    levels.append(QuadraticTopLevel(z_star, vn, jn, lipschitz=top_bound))

    cert = SyntheticCertificate(w_star=w_star, f_star=0.0, mu=mu, smoothness=float(eig[-1]),
                                strongly_convex=bool(strongly_convex), hessian=H)
    return CompositionProblem(levels, w0, name="synthetic", certificate=cert)


# ---------------------------------------------------------------------------
# mean-deviation portfolio


class PortfolioMeanLevel(StochasticLevel):
    """``x -> (mean_t <r_t, x>, x)`` over a batch of return rows."""

    def __init__(self, R, lipschitz):
        self.R = R
        self.n_data, self.in_dim = R.shape
        self.out_dim = 1 + self.in_dim
        self.r_bar = R.mean(axis=0)
        self.constants = LevelConstants(lipschitz=lipschitz)

    def _rows_mean(self, indices):
        return self.r_bar if indices is None else self.R[indices].mean(axis=0)

    def _value(self, x, indices):
        return np.concatenate(([self._rows_mean(indices) @ x], x))

    def _jacobian(self, x, indices):
        return np.hstack((self._rows_mean(indices)[:, None], np.eye(self.in_dim)))


class PortfolioDeviationLevel(StochasticLevel):
    """``(y, x) -> (y, mean_t (<r_t, x> - y)^2)``."""

    def __init__(self, R, lipschitz):
        self.R = R
        self.n_data, d = R.shape
        self.in_dim = 1 + d
        self.out_dim = 2
        self.constants = LevelConstants(lipschitz=lipschitz)

    def _value(self, z, indices):
        rows = self.R if indices is None else self.R[indices]
        dev = rows @ z[1:] - z[0]
        return np.array([z[0], np.mean(dev * dev)])

    def _jacobian(self, z, indices):
        rows = self.R if indices is None else self.R[indices]
        dev = rows @ z[1:] - z[0]
        jac = np.zeros((self.in_dim, 2))
        jac[0, 0] = 1.0
        jac[0, 1] = -2.0 * dev.mean()
        jac[1:, 1] = 2.0 * (dev @ rows) / len(dev)
        return jac


class MeanDeviationTopLevel(StochasticLevel):
    """``(m, s) -> -m + lam sqrt(max(s, 0) + eps)``; deterministic."""

    def __init__(self, lam, eps, lipschitz):
        self.lam = float(lam)
        self.eps = float(eps)
        self.in_dim = 2
        self.out_dim = 1
        self.n_data = None
        self.constants = LevelConstants(lipschitz=lipschitz)

    def _root(self, z):
        s = max(z[1], 0.0) + self.eps
        if s <= 0:
            raise DomainError("square root of a non-positive variance; use eps > 0")
        return np.sqrt(s)

    def _value(self, z, indices):
        return np.array([-z[0] + self.lam * self._root(z)])

    def _jacobian(self, z, indices):
        return np.array([[-1.0], [0.5 * self.lam / self._root(z)]])


def build_portfolio(R, lam=0.2, eps=1e-8, w0=None, lipschitz=100.0):
    """Three-level mean-deviation objective over the return matrix ``R``.

    Minimises ``-mean<r_t, x> + lam * sqrt(var<r_t, x> + eps)`` without
    constraints on ``x``.  ``eps`` keeps the square root differentiable at
    zero variance.  ``lipschitz`` is the declared projection radius.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or not np.all(np.isfinite(R)):
        raise ConfigurationError("returns must be a finite 2-D array")
    if R.shape[0] < 2:
        raise ConfigurationError("need at least two periods")
    if lam < 0:
        raise ConfigurationError(f"risk weight must be non-negative, got {lam}")
    d = R.shape[1]
    w0 = np.full(d, 1.0 / d) if w0 is None else w0
    levels = [PortfolioMeanLevel(R, lipschitz), PortfolioDeviationLevel(R, lipschitz),
              MeanDeviationTopLevel(lam, eps, lipschitz)]
    return CompositionProblem(levels, w0, name="portfolio")


def portfolio_objective(R, x, lam=0.2, eps=0.0):
    """Direct mean-deviation formula, independent of the level decomposition."""
    R = np.asarray(R, dtype=float)
    ret = R @ x
    mean = ret.mean()
    centered = ret - R.mean(axis=0) @ x
    return float(-mean + lam * np.sqrt(np.mean(centered ** 2) + eps))


# ---------------------------------------------------------------------------
# hierarchical tilted ERM


def _margins(X, y, w):
    return y * (X @ w)


def logistic_loss(X, y, w):
    """Per-sample logistic loss ``log(1 + exp(-y w.x))`` for labels in {-1, +1}."""
    return np.logaddexp(0.0, -_margins(X, y, w))


def logistic_loss_grad(X, y, w):
    """Per-sample gradients, shape ``(n, p)``."""
    return (-y * expit(-_margins(X, y, w)))[:, None] * X


class TiltedGroupLossLevel(StochasticLevel):
    """``w -> (mean_{z in G} exp(tau * loss(w; z)))_G`` over all groups.

    Sampling draws a within-group batch for every group.  Sampled calls clip
    the exponent to ``[-clip, clip]`` and count clipped terms in
    ``n_clipped``; exact calls never clip.
    """

    def __init__(self, groups, tau, lipschitz=100.0, clip=50.0):
        self.groups = [(np.asarray(X, dtype=float), np.asarray(y, dtype=float)) for X, y in groups]
        self.tau = float(tau)
        self.clip = float(clip)
        self.in_dim = self.groups[0][0].shape[1]
        self.out_dim = len(self.groups)
        self.sizes = np.array([len(y) for _, y in self.groups])
        self.n_data = int(self.sizes.sum())
        self.n_clipped = 0
        self.constants = LevelConstants(lipschitz=lipschitz)

    def draw(self, rng, batch_size):
        idx = tuple(rng.choice(n, size=min(batch_size, n), replace=False) if batch_size > 1
                    else rng.integers(n, size=1) for n in self.sizes)
        return LevelSample(idx, batch_size)

    def _terms(self, g, w, indices):
        X, y = self.groups[g]
        if indices is not None:
            X, y = X[indices[g]], y[indices[g]]
        expo = self.tau * logistic_loss(X, y, w)
        if indices is not None:
            over = np.abs(expo) > self.clip
            if over.any():
                self.n_clipped += int(over.sum())
                expo = np.clip(expo, -self.clip, self.clip)
        return X, y, np.exp(expo)

    def _value(self, w, indices):
        return np.array([self._terms(g, w, indices)[2].mean() for g in range(self.out_dim)])

    def _jacobian(self, w, indices):
        jac = np.empty((self.in_dim, self.out_dim))
        for g in range(self.out_dim):
            X, y, e = self._terms(g, w, indices)
            jac[:, g] = self.tau * (e @ logistic_loss_grad(X, y, w)) / len(e)
        return jac


class ScaledLogLevel(StochasticLevel):
    """Coordinatewise ``x -> log(x) / s``; deterministic."""

    def __init__(self, dim, s, lipschitz=100.0):
        self.in_dim = self.out_dim = int(dim)
        self.s = float(s)
        self.n_data = None
        self.constants = LevelConstants(lipschitz=lipschitz)

    def _check(self, x):
        if np.any(x <= 0):
            raise DomainError("logarithm of a non-positive argument")

    def _value(self, x, indices):
        self._check(x)
        return np.log(x) / self.s

    def _jacobian(self, x, indices):
        self._check(x)
        return np.diag(1.0 / (self.s * x))


class GroupTiltLevel(StochasticLevel):
    """``y -> sum_G (|G|/|D|) exp(t y_G)``; deterministic."""

    def __init__(self, weights, t, lipschitz=100.0):
        self.weights = np.asarray(weights, dtype=float)
        self.t = float(t)
        self.in_dim = len(self.weights)
        self.out_dim = 1
        self.n_data = None
        self.constants = LevelConstants(lipschitz=lipschitz)

    def _value(self, y, indices):
        return np.array([self.weights @ np.exp(self.t * y)])

    def _jacobian(self, y, indices):
        return (self.weights * self.t * np.exp(self.t * y))[:, None]


def build_hierarchical_term(groups, tau=-2.0, t=10.0, w0=None, lipschitz=100.0, clip=50.0):
    """Four-level hierarchical tilted logistic risk over the given groups.

    ``groups`` is a sequence of ``(X_G, y_G)`` with labels in {-1, +1}.  The
    chain is ``p -> |groups| -> |groups| -> 1 -> 1``.
    """
    groups = list(groups)
    if not groups:
        raise ConfigurationError("need at least one group")
    if tau == 0 or t == 0:
        raise ConfigurationError("tilts must be non-zero")
    for X, y in groups:
        if len(y) == 0:
            raise ConfigurationError("every group must be non-empty")
    first = TiltedGroupLossLevel(groups, tau, lipschitz, clip)
    m = first.out_dim
    weights = first.sizes / first.sizes.sum()
    levels = [first, ScaledLogLevel(m, tau, lipschitz), GroupTiltLevel(weights, t, lipschitz),
              ScaledLogLevel(1, t, lipschitz)]
    w0 = np.zeros(first.in_dim) if w0 is None else w0
    return CompositionProblem(levels, w0, name="hierarchical_term")


def term_objective(groups, w, tau=-2.0, t=10.0):
    """Direct hierarchical tilted risk via log-sum-exp (overflow-safe reference)."""
    sizes = np.array([len(y) for _, y in groups], dtype=float)
    risks = np.array([(logsumexp(tau * logistic_loss(np.asarray(X, float), np.asarray(y, float), w))
                       - np.log(len(y))) / tau for X, y in groups])
    return float((logsumexp(t * risks, b=sizes) - np.log(sizes.sum())) / t)


def groups_from_labels(X, y):
    """Split ``(X, y)`` by label; labels are mapped to -1 (first class) / +1.

    Returns ``(groups, classes)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) != 2:
        raise ConfigurationError(f"need exactly two classes, got {len(classes)}")
    signed = np.where(y == classes[1], 1.0, -1.0)
    groups = [(X[y == c], signed[y == c]) for c in classes]
    return groups, classes
