import numpy as np
import pytest

from smvr.core import (CompositionProblem, DimensionChain, FunctionLevel, LevelConstants,
                       draw_samples, evaluate_exact, gradient_exact, smoothness_constant)
from smvr.exceptions import ConfigurationError, ContractViolation, DomainError
from smvr.problems import build_portfolio, build_synthetic

from conftest import half_norm_problem


def affine_level(A, b=None):
    A = np.asarray(A, dtype=float)
    b = np.zeros(A.shape[0]) if b is None else b
    return FunctionLevel(A.shape[1], A.shape[0], lambda x, idx: A @ x + b,
                         lambda x, idx: A.T)


def constant_problem(lf, lj, K):
    c = LevelConstants(lipschitz=lf, jacobian_lipschitz=lj)
    levels = [FunctionLevel(1, 1, lambda x, idx: x, lambda x, idx: np.eye(1), constants=c)
              for _ in range(K)]
    return CompositionProblem(levels, [0.0])


class TestDimensionChain:
    def test_valid(self):
        assert DimensionChain((8, 6, 4, 1)).depth == 3

    @pytest.mark.parametrize("dims", [(1,), (3, 0, 1), (3, 2)])
    def test_invalid(self, dims):
        with pytest.raises(ConfigurationError):
            DimensionChain(dims)

    def test_adjacency_enforced(self):
        with pytest.raises(ConfigurationError, match="level 1"):
            CompositionProblem([affine_level(np.ones((3, 2))), affine_level(np.ones((1, 2)))],
                               np.zeros(2))


class TestEvaluate:
    def test_half_norm_minimum(self):
        assert evaluate_exact(half_norm_problem(), [0.0, 0.0]) == 0.0

    def test_composed_identity(self):
        z_star = np.array([1.0, -2.0])
        top = FunctionLevel(2, 1, lambda z, idx: 0.5 * (z - z_star) @ (z - z_star),
                            lambda z, idx: (z - z_star)[:, None])
        p = CompositionProblem([affine_level(np.eye(2)), top], np.zeros(2))
        assert evaluate_exact(p, z_star) == 0.0

    def test_portfolio_direct_formula(self, rng):
        R = rng.normal(size=(4, 3))
        x = rng.normal(size=3)
        p = build_portfolio(R, lam=0.2, eps=0.0)
        ret = R @ x
        direct = -ret.mean() + 0.2 * np.sqrt(np.mean((ret - R.mean(axis=0) @ x) ** 2))
        assert abs(evaluate_exact(p, x) - direct) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            evaluate_exact(half_norm_problem(), [1.0, 2.0, 3.0])

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_domain_error_names_level(self):
        bad = FunctionLevel(1, 1, lambda x, idx: np.log(x), lambda x, idx: (1 / x)[:, None])
        p = CompositionProblem([affine_level([[1.0]]), bad], [1.0])
        with pytest.raises(DomainError) as info:
            evaluate_exact(p, [-1.0])
        assert info.value.level == 1
        assert "level 1" in str(info.value)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_start_rejected(self):
        bad = FunctionLevel(1, 1, lambda x, idx: np.log(x), lambda x, idx: (1 / x)[:, None])
        with pytest.raises(ConfigurationError):
            CompositionProblem([bad], [-1.0])


class TestGradient:
    def test_half_norm(self):
        np.testing.assert_array_equal(gradient_exact(half_norm_problem(), [3.0, 4.0]), [3.0, 4.0])

    def test_affine_then_linear(self, rng):
        A = rng.normal(size=(3, 2))
        c = rng.normal(size=3)
        top = FunctionLevel(3, 1, lambda z, idx: c @ z, lambda z, idx: c[:, None])
        p = CompositionProblem([affine_level(A), top], np.zeros(2))
        np.testing.assert_allclose(gradient_exact(p, rng.normal(size=2)), A.T @ c, rtol=1e-14)


class TestSmoothness:
    @pytest.mark.parametrize("lf, lj, K, expected", [(1, 1, 1, 1.0), (2, 1, 2, 6.0), (1, 1, 3, 3.0)])
    def test_closed_form(self, lf, lj, K, expected):
        assert smoothness_constant(constant_problem(lf, lj, K)) == pytest.approx(expected)

    def test_missing_constants(self):
        p = CompositionProblem([affine_level([[1.0]])], [0.0])
        with pytest.raises(ConfigurationError):
            smoothness_constant(p)


class TestDrawSamples:
    def test_single_index_per_level(self):
        p = build_synthetic()
        samples = draw_samples(p, 1, 0)
        assert len(samples) == 3
        assert all(len(s.indices) == 1 for s in samples)

    def test_batch_without_replacement(self):
        p = build_synthetic(pool_size=50)
        for s in draw_samples(p, 20, 1):
            assert len(s.indices) == 20
            assert len(np.unique(s.indices)) == 20
            assert s.indices.min() >= 0 and s.indices.max() < 50

    def test_replay(self):
        p = build_synthetic()
        a = [draw_samples(p, 3, g) for g in [np.random.default_rng(5)] * 4]
        b = [draw_samples(p, 3, g) for g in [np.random.default_rng(5)] * 4]
        assert all(x.same_as(y) for sa, sb in zip(a, b) for x, y in zip(sa, sb))

    def test_batch_too_large(self):
        with pytest.raises(ConfigurationError):
            draw_samples(build_synthetic(pool_size=10), 11, 0)

    def test_bad_batch(self):
        with pytest.raises(ContractViolation):
            draw_samples(build_synthetic(), 0, 0)
