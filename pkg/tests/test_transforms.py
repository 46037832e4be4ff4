import numpy as np
import pytest
from numpy.testing import assert_allclose

from bounds.transforms import (
    binary_entropy,
    expansion_factors,
    expansion_remainder,
    legendre_log,
    legendre_opt_lambda,
    log_noisy_or_expansion,
    noisy_or_bound,
    noisy_or_conjugate,
    noisy_or_expansion,
    noisy_or_opt_xi,
    quad_coeffs,
    quad_curvature,
    sigmoid,
    sigmoid_bound,
    sigmoid_opt_xi,
)


class TestSigmoidTransform:
    def test_tight_at_optimum(self):
        x = np.linspace(-20, 20, 1000)
        assert_allclose(sigmoid_bound(x, sigmoid_opt_xi(x)), sigmoid(x), rtol=1e-12)

    def test_dominates_off_optimum(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(-10, 10, size=10_000)
        xi = rng.uniform(0, 1, size=10_000)
        assert np.all(sigmoid_bound(x, xi) >= sigmoid(x) * (1 - 1e-12))

    def test_xi_zero_gives_one(self):
        assert sigmoid_bound(3.0, 0.0) == 1.0

    def test_entropy_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert_allclose(binary_entropy(0.5), np.log(2.0), rtol=1e-15)

    def test_xi_out_of_range(self):
        with pytest.raises(ValueError):
            sigmoid_bound(0.0, 1.5)


class TestNoisyOrTransform:
    def test_tight_at_optimum(self):
        x = np.geomspace(1e-2, 30, 1000)
        assert_allclose(noisy_or_bound(x, noisy_or_opt_xi(x)), -np.expm1(-x), rtol=1e-12)

    def test_dominates_off_optimum(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(1e-3, 10, size=10_000)
        xi = rng.exponential(2.0, size=10_000)
        assert np.all(noisy_or_bound(x, xi) >= -np.expm1(-x) * (1 - 1e-12))

    def test_conjugate_at_zero(self):
        assert noisy_or_conjugate(0.0) == 0.0

    def test_x_must_be_positive(self):
        with pytest.raises(ValueError):
            noisy_or_bound(0.0, 1.0)


class TestLegendre:
    def test_tight_at_optimum(self):
        x = np.geomspace(1e-6, 1e6, 1000)
        assert_allclose(legendre_log(x, legendre_opt_lambda(x)), np.log(x), atol=1e-12)

    def test_dominates(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(0.01, 100, size=10_000)
        lam = rng.uniform(0.001, 50, size=10_000)
        assert np.all(legendre_log(x, lam) >= np.log(x) - 1e-12)

    def test_lambda_must_be_positive(self):
        with pytest.raises(ValueError):
            legendre_log(1.0, 0.0)


class TestExpansion:
    def test_value_at_zero(self):
        for n_terms in (1, 4, 16, 40):
            assert noisy_or_expansion(0.0, n_terms) == 0.5 ** n_terms

    def test_telescoping_identity(self):
        x = np.geomspace(1e-4, 20, 1000)
        product = noisy_or_expansion(x, 16) * expansion_remainder(x, 16)
        assert_allclose(product, -np.expm1(-x), rtol=1e-12)

    def test_truncation_overestimates(self):
        x = np.linspace(1e-3, 10, 1000)
        assert np.all(noisy_or_expansion(x, 8) >= -np.expm1(-x) - 1e-12)

    def test_sixteen_terms_uniform_error(self):
        x = np.linspace(0, 10, 100_001)
        assert np.max(np.abs(noisy_or_expansion(x, 16) + np.expm1(-x))) < 2e-5

    def test_log_form_matches(self):
        x = np.geomspace(1e-3, 10, 200)
        assert_allclose(log_noisy_or_expansion(x, 16), np.log(noisy_or_expansion(x, 16)), rtol=1e-10)

    def test_factors_shape(self):
        assert expansion_factors(np.ones(5), 7).shape == (5, 7)


class TestQuadraticMinorant:
    def test_below_target_on_unit_interval(self):
        X = np.linspace(0, 1, 2001)
        for x in np.linspace(0, 0.999, 200):
            q = quad_coeffs(x)
            assert q.a >= 0
            assert np.all(q(X) <= -np.log1p(X) + 1e-12)

    def test_touches_at_expansion_point(self):
        q = quad_coeffs(0.3)
        assert_allclose(q(0.3), -np.log1p(0.3), rtol=1e-15)

    def test_curvature_limit_at_one(self):
        assert_allclose(quad_curvature(1.0 - 1e-12), 0.125, rtol=1e-9)

    def test_series_branch_is_continuous(self):
        # 0.99 sits on the direct side, 0.9901 on the series side
        assert_allclose(quad_curvature(0.9901), quad_curvature(0.99), rtol=1e-4)

    def test_expansion_point_one_is_rejected(self):
        with pytest.raises(ValueError):
            quad_coeffs(1.0)
