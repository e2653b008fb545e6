import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smvr.core import evaluate_exact, forward_exact, gradient_exact
from smvr.data_io import synth_classification
from smvr.exceptions import ConfigurationError
from smvr.problems import (build_hierarchical_term, build_portfolio, build_synthetic,
                           groups_from_labels, logistic_loss, portfolio_objective, term_objective)

from conftest import central_jacobian, rel_err


def small_term(seed=0, n=120):
    X, y = synth_classification(seed, n_samples=n, n_features=4, rare_ratio=1 / 3)
    groups, _ = groups_from_labels(X, y)
    return build_hierarchical_term(groups)


PROBLEMS = {
    "synthetic": lambda: build_synthetic(pool_size=300),
    # unit-scale returns keep the variance argument well above the finite-difference step
    "portfolio": lambda: build_portfolio(np.random.default_rng(0).normal(0.1, 1.0, (60, 4))),
    "term": small_term,
}


def level_inputs(problem, w):
    return forward_exact(problem, w)[:-1]


@pytest.mark.parametrize("name", PROBLEMS)
class TestBuiltins:
    def test_level_jacobians_match_fd(self, name):
        p = PROBLEMS[name]()
        rng = np.random.default_rng(1)
        for _ in range(5):
            w = p.w0 + 0.3 * rng.normal(size=p.dim)
            for level, x in zip(p.levels, level_inputs(p, w)):
                fd = central_jacobian(level.exact_value, x)
                assert rel_err(level.exact_jacobian(x), fd) <= 1e-5

    def test_gradient_matches_fd(self, name):
        p = PROBLEMS[name]()
        rng = np.random.default_rng(2)
        for _ in range(5):
            w = p.w0 + 0.3 * rng.normal(size=p.dim)
            fd = central_jacobian(lambda v: evaluate_exact(p, v), w)[:, 0]
            assert rel_err(gradient_exact(p, w), fd) <= 1e-5

    def test_value_oracle_unbiased(self, name):
        p = PROBLEMS[name]()
        rng = np.random.default_rng(3)
        n = 10_000
        for level, x in zip(p.levels, level_inputs(p, p.w0 + 0.1)):
            if level.n_data is None:
                continue
            draws = np.array([level.value(x, level.draw(rng, 1)) for _ in range(n)])
            sd = draws.std(axis=0, ddof=1)
            err = np.abs(draws.mean(axis=0) - level.exact_value(x))
            assert np.all(err <= 4 * sd / np.sqrt(n) + 1e-12)

    def test_jacobian_oracle_unbiased(self, name):
        p = PROBLEMS[name]()
        rng = np.random.default_rng(4)
        n = 10_000
        for level, x in zip(p.levels, level_inputs(p, p.w0 + 0.1)):
            if level.n_data is None:
                continue
            draws = np.array([level.jacobian(x, level.draw(rng, 1)) for _ in range(n)])
            sd = draws.std(axis=0, ddof=1)
            err = np.abs(draws.mean(axis=0) - level.exact_jacobian(x))
            assert np.all(err <= 4 * sd / np.sqrt(n) + 1e-12)


class TestPortfolio:
    def test_chain(self):
        p = build_portfolio(np.ones((5, 3)))
        assert p.chain.dims == (3, 4, 2, 1)

    def test_direct_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            R = rng.normal(size=(4, 3))
            x = rng.normal(size=3)
            assert abs(evaluate_exact(build_portfolio(R, eps=0.0), x)
                       - portfolio_objective(R, x)) <= 1e-12

    def test_constant_single_asset(self):
        p = build_portfolio(np.full((6, 1), 0.03), lam=0.2, eps=1e-8)
        assert evaluate_exact(p, [1.0]) == pytest.approx(-0.03 + 0.2 * 1e-4, abs=1e-15)

    def test_sampled_rows_average_to_exact(self):
        R = np.random.default_rng(1).normal(size=(7, 3))
        p = build_portfolio(R)
        x = np.array([0.2, -0.4, 1.0])
        first = p.levels[0]
        mean = np.mean([first._value(x, np.array([i])) for i in range(7)], axis=0)
        np.testing.assert_allclose(mean, first.exact_value(x), rtol=1e-14)

    @pytest.mark.parametrize("R", [np.ones((1, 3)), np.array([[np.nan, 1.0], [1.0, 1.0]])])
    def test_invalid_returns(self, R):
        with pytest.raises(ConfigurationError):
            build_portfolio(R)

    def test_negative_lambda(self):
        with pytest.raises(ConfigurationError):
            build_portfolio(np.ones((3, 2)), lam=-1.0)


class TestTerm:
    @settings(max_examples=20, deadline=None)
    @given(w=st.floats(-2, 2), z=st.floats(-2, 2), label=st.sampled_from([-1.0, 1.0]),
           tau=st.sampled_from([-2.0, -0.5, 1.0]), t=st.sampled_from([10.0, 1.0, -3.0]))
    def test_single_sample_telescopes(self, w, z, label, tau, t):
        X, y = np.array([[z]]), np.array([label])
        p = build_hierarchical_term([(X, y)], tau=tau, t=t)
        loss = logistic_loss(X, y, np.array([w]))[0]
        assert abs(evaluate_exact(p, [w]) - loss) <= 1e-12

    def test_two_groups_by_hand(self):
        # w = 1, 1-D features equal to the margins; losses log 2, log 2 | log 2, log 3
        a = [(np.array([[0.0], [0.0]]), np.ones(2)),
             (np.array([[0.0], [-np.log(2.0)]]), np.ones(2))]
        p = build_hierarchical_term(a, tau=-2.0, t=10.0)
        risk_b = 0.5 * np.log(72.0 / 13.0)
        expected = np.log(0.5 * 2.0 ** 10 + 0.5 * np.exp(10 * risk_b)) / 10
        assert evaluate_exact(p, [1.0]) == pytest.approx(expected, abs=1e-12)
        assert term_objective(a, np.array([1.0])) == pytest.approx(expected, abs=1e-12)

    def test_matches_stable_reference(self):
        X, y = synth_classification(1, n_samples=200, n_features=3)
        groups, classes = groups_from_labels(X, y)
        p = build_hierarchical_term(groups)
        w = np.random.default_rng(0).normal(size=3)
        assert evaluate_exact(p, w) == pytest.approx(term_objective(groups, w), abs=1e-10)
        assert p.chain.dims == (3, 2, 2, 1, 1)
        assert list(classes) == [0, 1]

    def test_clip_counter(self):
        X, y = np.array([[40.0], [0.0]]), np.array([-1.0, 1.0])
        p = build_hierarchical_term([(X, y)])
        first = p.levels[0]
        first.exact_value(np.array([1.0]))
        assert first.n_clipped == 0
        first._value(np.array([1.0]), (np.array([0]),))
        assert first.n_clipped == 1

    @pytest.mark.parametrize("kw", [dict(tau=0.0), dict(t=0.0)])
    def test_zero_tilt(self, kw):
        with pytest.raises(ConfigurationError):
            build_hierarchical_term([(np.ones((2, 1)), np.ones(2))], **kw)

    def test_empty_group(self):
        with pytest.raises(ConfigurationError):
            build_hierarchical_term([(np.ones((2, 1)), np.ones(2)), (np.ones((0, 1)), np.ones(0))])

    def test_groups_from_labels(self):
        with pytest.raises(ConfigurationError):
            groups_from_labels(np.ones((3, 2)), np.array([0, 1, 2]))


class TestSynthetic:
    def test_zero_noise_optimum(self):
        p = build_synthetic(sigma_f=0, sigma_J=0)
        cert = p.certificate
        assert evaluate_exact(p, cert.w_star) == pytest.approx(cert.f_star, abs=1e-14)
        assert np.linalg.norm(gradient_exact(p, cert.w_star)) <= 1e-12

    def test_identity_stack(self):
        p = build_synthetic(K=2, dims=(3, 3, 1), matrices=[np.eye(3)], offsets=[np.zeros(3)],
                            w_star=np.zeros(3), sigma_f=0, sigma_J=0)
        w = np.array([1.0, -2.0, 0.5])
        assert evaluate_exact(p, w) == pytest.approx(0.5 * w @ w, abs=1e-14)
        assert p.certificate.mu == pytest.approx(1.0)

    def test_mu_by_power_iteration(self):
        p = build_synthetic(sigma_f=0, sigma_J=0, dims=(4, 5, 6, 1))
        w, h = p.w0, 1e-4

        def hvp(v):
            return (gradient_exact(p, w + h * v) - gradient_exact(p, w - h * v)) / (2 * h)

        v = np.random.default_rng(0).normal(size=4)
        for _ in range(300):  # top eigenvalue
            v = hvp(v)
            v /= np.linalg.norm(v)
        top = v @ hvp(v)
        v = np.random.default_rng(1).normal(size=4)
        for _ in range(3000):  # top of (top I - H) gives the bottom of H
            v = top * v - hvp(v)
            v /= np.linalg.norm(v)
        bottom = v @ hvp(v)
        assert top == pytest.approx(p.certificate.smoothness, rel=1e-6)
        assert bottom == pytest.approx(p.certificate.mu, rel=1e-4)

    def test_strong_convexity_and_pl(self):
        p = build_synthetic(dims=(4, 5, 6, 1))
        cert = p.certificate
        assert cert.strongly_convex
        rng = np.random.default_rng(5)
        for _ in range(20):
            w = cert.w_star + rng.normal(size=4)
            gap = evaluate_exact(p, w) - cert.f_star
            assert gap >= 0.5 * cert.mu * np.sum((w - cert.w_star) ** 2) * (1 - 1e-10)
            assert 2 * cert.mu * gap <= np.sum(gradient_exact(p, w) ** 2) * (1 + 1e-10)

    def test_default_is_pl_not_strongly_convex(self):
        cert = build_synthetic().certificate
        assert not cert.strongly_convex and cert.mu > 0

    def test_reproducible(self):
        a, b = build_synthetic(seed=3), build_synthetic(seed=3)
        np.testing.assert_array_equal(a.w0, b.w0)
        np.testing.assert_array_equal(a.levels[0].A, b.levels[0].A)

    @pytest.mark.parametrize("kw", [dict(K=3, dims=(8, 6, 1)), dict(K=2, dims=(3, 3, 2)),
                                    dict(K=2, dims=(3, 3, 1), matrices=[np.eye(2)])])
    def test_invalid(self, kw):
        with pytest.raises(ConfigurationError):
            build_synthetic(**kw)
