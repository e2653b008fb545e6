from pathlib import Path

import numpy as np
import pytest

from smvr.core import CompositionProblem, FunctionLevel, LevelConstants

DATA = Path(__file__).parent / "data"


def central_jacobian(fn, x, h=1e-6, relative=False):
    """Transposed Jacobian (in_dim, out_dim) of ``fn`` by central differences.

    ``relative=True`` scales the step by ``max(1, |x_k|)`` so that large
    coordinates do not drown the difference in rounding error.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h * max(1.0, abs(x[k])) if relative else h
        cols.append((np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2 * e[k]))
    return np.array(cols)


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def half_norm_problem(dim=2, w0=None):
    """K=1, f(w) = 0.5 ||w||^2, deterministic."""
    level = FunctionLevel(dim, 1, lambda x, idx: 0.5 * x @ x, lambda x, idx: x[:, None],
                          constants=LevelConstants(lipschitz=10.0, jacobian_lipschitz=1.0))
    return CompositionProblem([level], np.ones(dim) if w0 is None else w0, name="half_norm")


def exp_bias_problem(sigma=0.5, dim=3, pool=2000, seed=0, w0=None):
    """Two levels: ``f1(w; xi) = w + xi`` with centred noise, ``f2(z) = sum(exp(z) - z)``.

    The plug-in gradient is biased by ``exp(w) (E exp(xi) - 1)``.
    """
    rng = np.random.default_rng(seed)
    noise = rng.normal(scale=sigma, size=(pool, dim))
    noise -= noise.mean(axis=0)

    def f1(x, idx):
        return x if idx is None else x + noise[idx].mean(axis=0)

    def j1(x, idx):
        return np.eye(dim)

    top = FunctionLevel(dim, 1, lambda z, idx: np.sum(np.exp(z) - z),
                        lambda z, idx: (np.exp(z) - 1.0)[:, None],
                        constants=LevelConstants(lipschitz=50.0, jacobian_lipschitz=10.0))
    first = FunctionLevel(dim, dim, f1, j1, n_data=pool,
                          constants=LevelConstants(lipschitz=np.sqrt(dim), jacobian_lipschitz=0.0))
    w0 = np.full(dim, 0.5) if w0 is None else w0
    return CompositionProblem([first, top], w0, name="exp_bias")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""

    def _report(number, name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2} ({name}): {detail}"
        ACCEPTANCE.append((number, line))
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
