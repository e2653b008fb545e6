import numpy as np
import pytest

from smvr.baselines import nested_sgd_run, plugin_gradient, scsc_style_run
from smvr.core import CompositionProblem, FunctionLevel, draw_samples, gradient_exact
from smvr.problems import build_synthetic
from smvr.schedules import ConstantSchedule, SmvrSchedule

from conftest import exp_bias_problem, half_norm_problem


def exact_gd(problem, eta, T):
    w = problem.w0.copy()
    for _ in range(T):
        w = w - eta * gradient_exact(problem, w)
    return w


@pytest.fixture
def noisy():
    return build_synthetic(pool_size=200)


@pytest.mark.parametrize("run", [nested_sgd_run, scsc_style_run])
def test_zero_noise_is_exact_gd(run):
    p = build_synthetic(sigma_f=0, sigma_J=0)
    res = run(p, ConstantSchedule(0.1, 0.5), 100, rng=0)
    np.testing.assert_allclose(res.w_final, exact_gd(p, 0.1, 100), rtol=0, atol=1e-10)


def test_single_level_is_sgd():
    # one noisy level: f(w; xi) = 0.5 ||w||^2 + <xi, w>, gradient w + xi
    noise = np.random.default_rng(0).normal(size=(50, 2))
    level = FunctionLevel(2, 1,
                          lambda x, idx: 0.5 * x @ x + (0 if idx is None else noise[idx].mean(0) @ x),
                          lambda x, idx: (x + (0 if idx is None else noise[idx].mean(0)))[:, None],
                          n_data=50)
    p = CompositionProblem([level], np.ones(2))
    res = nested_sgd_run(p, ConstantSchedule(0.1), 20, rng=3)
    rng = np.random.default_rng(3)
    w = np.ones(2)
    for _ in range(20):
        (s,) = draw_samples(p, 1, rng)
        w = w - 0.1 * (w + noise[s.indices].mean(0))
    np.testing.assert_array_equal(res.w_final, w)


def test_scsc_beta_one_is_nested(noisy):
    a = scsc_style_run(noisy, ConstantSchedule(0.05, 1.0), 80, rng=11)
    b = nested_sgd_run(noisy, ConstantSchedule(0.05, 1.0), 80, rng=11)
    np.testing.assert_array_equal(a.w_final, b.w_final)
    assert a.trace.loss == b.trace.loss


@pytest.mark.parametrize("T, B", [(1, 1), (15, 3)])
def test_accounting(noisy, T, B):
    K = noisy.depth
    nested = nested_sgd_run(noisy, ConstantSchedule(0.05), T, batch_size=B, rng=0).trace
    assert nested.value_evals == nested.jacobian_evals == K * B * T
    assert nested.samples[-1] == 2 * K * B * T
    scsc = scsc_style_run(noisy, ConstantSchedule(0.05, 0.5), T, batch_size=B, rng=0).trace
    assert scsc.value_evals == K * B * (2 * T - 1)
    assert scsc.jacobian_evals == K * B * T
    assert scsc.samples[-1] == K * B * (3 * T - 1)


@pytest.mark.parametrize("run", [nested_sgd_run, scsc_style_run])
def test_deterministic_and_increasing(noisy, run):
    s = SmvrSchedule.practical(0.1, 0.5)
    a = run(noisy, s, 60, rng=2)
    assert a.trace == run(noisy, s, 60, rng=2).trace
    assert np.all(np.diff(a.trace.samples) > 0)
    assert a.tau == 60
    np.testing.assert_array_equal(a.w, a.w_final)


def test_deterministic_problem_has_no_bias():
    p = half_norm_problem()
    g = plugin_gradient(p, np.array([3.0, 4.0]), draw_samples(p, 1, 0))
    np.testing.assert_array_equal(g, [3.0, 4.0])


def test_plugin_gradient_is_biased():
    p = exp_bias_problem()
    w = p.w0
    rng = np.random.default_rng(0)
    n = 100_000
    draws = np.array([plugin_gradient(p, w, draw_samples(p, 1, rng)) for _ in range(n)])
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(n)
    z = np.abs(mean - gradient_exact(p, w)) / se
    assert np.all(z > 5)
