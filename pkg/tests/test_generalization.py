import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixuplab.data import Dataset, center, gen_gaussian_halfspace
from mixuplab.errors import DegenerateData, InvalidDelta, InvalidRho
from mixuplab.generalization import (
    HiddenFeatureStats,
    attained_gamma_net,
    estimate_rademacher_ball,
    estimate_rho,
    exhaustive_rademacher_ball,
    generalization_bound_glm,
    generalization_bound_net,
    generalization_gap,
    glm_class_radius,
    hidden_feature_stats,
    numerical_rank,
    rademacher_bound_glm,
    rademacher_bound_net,
    whitened_inputs,
)
from mixuplab.models import LOGISTIC, SQUARED, LinearModel, TwoLayerNet, init_linear, init_two_layer


class TestRademacherBall:
    def test_zero_radius(self, rng):
        assert estimate_rademacher_ball(rng.standard_normal((5, 3)), 0.0, 100).mean == 0.0

    def test_single_point(self):
        est = estimate_rademacher_ball(np.array([[3.0, 4.0]]), 2.0, 50)
        assert est.mean == pytest.approx(10.0, rel=1e-15) and est.std_error == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("n", [4, 8, 12])
    def test_orthonormal_against_exhaustive(self, n):
        X = np.eye(n)
        exact = exhaustive_rademacher_ball(X, 1.0)
        assert exact == pytest.approx(1 / math.sqrt(n), rel=1e-12)
        est = estimate_rademacher_ball(X, 1.0, 4000, seed=n)
        assert abs(est.mean - exact) <= 3 * est.std_error + 1e-12

    def test_exhaustive_brute_force(self, rng):
        X = rng.standard_normal((5, 2))
        total = 0.0
        for k in range(32):
            xi = np.array([1 if (k >> i) & 1 else -1 for i in range(5)])
            total += np.linalg.norm(xi @ X) / 5
        assert exhaustive_rademacher_ball(X, 1.5) == pytest.approx(1.5 * total / 32, rel=1e-13)

    def test_exhaustive_limit(self):
        with pytest.raises(ValueError):
            exhaustive_rademacher_ball(np.ones((21, 1)), 1.0)


class TestBoundGlm:
    def test_equal_gamma_rho(self):
        assert rademacher_bound_glm(0.3, 0.3, 4, 16) == pytest.approx(0.5)

    def test_arithmetic(self):
        assert rademacher_bound_glm(16 * 0.25, 0.25, 4, 100) == pytest.approx(0.8)

    def test_zero_gamma(self):
        assert rademacher_bound_glm(0.0, 0.4, 3, 10) == 0.0

    @pytest.mark.parametrize("rho", [0.0, -0.1, 0.6])
    def test_invalid_rho(self, rho):
        with pytest.raises(InvalidRho):
            rademacher_bound_glm(1.0, rho, 2, 10)

    @given(st.floats(1e-3, 100), st.floats(1e-3, 0.5), st.integers(1, 8), st.integers(2, 40), st.integers(0, 10**6))
    def test_whitened_ball_is_below_bound(self, gamma, rho, d, n, seed):
        X = np.random.default_rng(seed).standard_normal((n, d))
        Xw, rank = whitened_inputs(X)
        est = estimate_rademacher_ball(Xw, glm_class_radius(gamma, rho), 200, seed)
        assert est.mean <= rademacher_bound_glm(gamma, rho, rank, n) * (1 + 1e-12)

    def test_generalization_bound(self):
        base = generalization_bound_glm(0.2, 0.0, 0.3, 2, 50, bound_B=2.0, delta=0.1)
        assert base == pytest.approx(0.2 + 2.0 * math.sqrt(math.log(10) / 100))
        full = generalization_bound_glm(0.2, 1.0, 0.25, 4, 100, delta=1.0)
        assert full == pytest.approx(0.2 + 2 * rademacher_bound_glm(1.0, 0.25, 4, 100))
        a = generalization_bound_glm(0.0, 1.0, 0.25, 4, 100)
        b = generalization_bound_glm(0.0, 1.0, 0.25, 4, 400)
        assert b == pytest.approx(a / 2)

    @pytest.mark.parametrize("delta", [0.0, 1.5])
    def test_invalid_delta(self, delta):
        with pytest.raises(InvalidDelta):
            generalization_bound_glm(0.1, 1.0, 0.25, 2, 10, delta=delta)


class TestWhitening:
    def test_identity_second_moment(self, rng):
        X = rng.standard_normal((40, 3))
        Xw, rank = whitened_inputs(X)
        assert rank == 3
        np.testing.assert_allclose(Xw.T @ Xw / 40, np.eye(3), atol=1e-10)

    def test_rank_deficient(self, rng):
        X = rng.standard_normal((30, 2)) @ np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
        _, rank = whitened_inputs(X)
        assert rank == 2
        assert numerical_rank(np.array([0.0, 0.0])) == 0


class TestRho:
    def test_squared_clamped(self, rng):
        X = 3 * rng.standard_normal((50, 3))
        assert estimate_rho(X, SQUARED, 500, 0) == 0.5

    def test_zero_inputs(self):
        with pytest.raises(DegenerateData):
            estimate_rho(np.zeros((5, 2)), LOGISTIC)

    @given(st.integers(0, 10**6))
    def test_range(self, seed):
        X = np.random.default_rng(seed).standard_normal((20, 3)) * 5
        rho = estimate_rho(X, LOGISTIC, 200, seed)
        assert 0.0 < rho <= 0.5


class TestHiddenStats:
    def test_constant_features(self):
        net = TwoLayerNet(np.ones((3, 2)), np.ones(3))
        ds = Dataset(np.tile([1.0, 2.0], (6, 1)), np.zeros(6))
        stats = hidden_feature_stats(net, ds)
        assert stats.rank == 0 and stats.mu_pullback_sq == 0.0 and stats.mean_outside_range

    def test_identity_layer(self, rng):
        X = rng.random((40, 3)) + 0.5
        stats = hidden_feature_stats(TwoLayerNet(np.eye(3), np.ones(3)), Dataset(X, np.zeros(40)))
        np.testing.assert_allclose(stats.sigma_cov, np.cov(X, rowvar=False, bias=True), atol=1e-14)
        np.testing.assert_allclose(stats.sigma_mean, X.mean(axis=0))
        cov_inv = np.linalg.inv(stats.sigma_cov)
        assert stats.mu_pullback_sq == pytest.approx(stats.sigma_mean @ cov_inv @ stats.sigma_mean, rel=1e-8)

    @given(st.integers(2, 8), st.integers(1, 6), st.integers(0, 1000))
    def test_rank_bound(self, n, d, seed):
        X = np.random.default_rng(seed).standard_normal((n, d))
        stats = hidden_feature_stats(init_two_layer(d, 10, seed), Dataset(X, np.zeros(n)))
        # features are nonlinear in x, so the width (not the input dimension) caps the rank
        assert stats.rank <= min(10, n - 1)

    def test_net_bound(self):
        stats = HiddenFeatureStats(np.eye(3), np.zeros(3), 3, 1.0)
        assert rademacher_bound_net(1.0, stats, 100) == pytest.approx(0.4)
        assert rademacher_bound_net(0.0, stats, 100) == 0.0
        assert rademacher_bound_net(2.0, stats, 100) == pytest.approx(0.4 * math.sqrt(2))
        assert generalization_bound_net(0.1, 1.0, stats, 100, delta=1.0) == pytest.approx(0.9)
        with pytest.raises(InvalidDelta):
            generalization_bound_net(0.1, 1.0, stats, 100, delta=0.0)

    def test_attained_gamma(self, rng):
        net = init_two_layer(3, 4, 1)
        ds = Dataset(rng.standard_normal((20, 3)), np.zeros(20))
        stats = hidden_feature_stats(net, ds)
        assert attained_gamma_net(net, stats) == pytest.approx(net.theta1 @ stats.sigma_cov @ net.theta1)


class TestGap:
    def test_same_sets(self):
        ds = gen_gaussian_halfspace(20, 3, 0)
        assert generalization_gap(init_linear(3, 0), LOGISTIC, ds, ds) == 0.0

    def test_zero_model(self):
        a, b = gen_gaussian_halfspace(20, 3, 0), gen_gaussian_halfspace(30, 3, 1)
        assert generalization_gap(LinearModel(np.zeros(3)), LOGISTIC, a, b) == pytest.approx(0.0, abs=1e-15)
