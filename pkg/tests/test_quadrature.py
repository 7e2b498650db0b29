import math

import numpy as np
import pytest

from imputed_logreg.errors import NonFiniteIntegrand, OrderOutOfRange
from imputed_logreg.kernels import logistic_rho, logistic_rho_prime
from imputed_logreg.quadrature import expect_1d, expect_2d, expect_3d, make_rule


def _double_factorial(k):
    return math.prod(range(k, 0, -2)) if k > 0 else 1


class TestMakeRule:
    def test_two_point_rule(self):
        r = make_rule(2)
        np.testing.assert_allclose(np.sort(r.nodes), [-1.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(r.weights, [0.5, 0.5], atol=1e-15)

    @pytest.mark.parametrize("order", [2, 8, 40, 64, 128, 256])
    def test_low_moments(self, order):
        r = make_rule(order)
        assert abs(r.weights.sum() - 1) <= 1e-12
        assert abs(r.weights @ r.nodes) <= 1e-12
        assert abs(r.weights @ r.nodes ** 2 - 1) <= 1e-10
        assert np.all(r.weights > 0)

    def test_fourth_moment(self):
        r = make_rule(40)
        assert abs(r.weights @ r.nodes ** 4 - 3) <= 1e-9

    @pytest.mark.parametrize("order", [3, 8, 12])
    def test_polynomial_exactness(self, order):
        r = make_rule(order)
        for k in range(2 * order):
            exact = _double_factorial(k - 1) if k % 2 == 0 else 0.0
            scale = r.weights @ np.abs(r.nodes) ** k
            assert r.weights @ r.nodes ** k == pytest.approx(exact, rel=1e-11, abs=1e-13 * scale)

    def test_logistic_symmetry(self):
        assert abs(expect_1d(make_rule(64), logistic_rho_prime) - 0.5) <= 1e-12

    @pytest.mark.parametrize("order", [1, 0, 257, 2.5])
    def test_out_of_range(self, order):
        with pytest.raises(OrderOutOfRange):
            make_rule(order)

    def test_rules_are_cached_and_read_only(self):
        r = make_rule(64)
        assert make_rule(64) is r
        with pytest.raises(ValueError):
            r.nodes[0] = 0.0


class TestExpectations:
    def test_independence(self):
        assert abs(expect_2d(make_rule(64), lambda a, b: a * b)) <= 1e-12

    def test_product_of_second_moments(self):
        assert abs(expect_3d(make_rule(16), lambda a, b, c: a ** 2 * b ** 2 * c ** 2) - 1) <= 1e-9

    def test_2d_and_3d_moments(self):
        r = make_rule(20)
        assert expect_2d(r, lambda a, b: (a + b) ** 4) == pytest.approx(12.0, abs=1e-10)
        assert expect_3d(r, lambda a, b, c: a ** 4 * c ** 2 + b) == pytest.approx(3.0, abs=1e-10)

    def test_monte_carlo_rho(self):
        z = np.random.default_rng(7).standard_normal(10_000_000)
        vals = logistic_rho(z)
        se = vals.std() / math.sqrt(z.size)
        assert abs(expect_1d(make_rule(80), logistic_rho) - vals.mean()) < 3 * se

    def test_linearity(self):
        r = make_rule(64)
        f = lambda z: logistic_rho(z)
        g = lambda z: np.cos(z) * logistic_rho_prime(2 * z)
        a, b = 1.7, -0.3
        lhs = expect_1d(r, lambda z: a * f(z) + b * g(z))
        assert lhs == pytest.approx(a * expect_1d(r, f) + b * expect_1d(r, g), abs=1e-12)
        f2 = lambda u, v: np.sin(u) * v ** 2
        g2 = lambda u, v: logistic_rho(u - v)
        lhs = expect_2d(r, lambda u, v: a * f2(u, v) + b * g2(u, v))
        assert lhs == pytest.approx(a * expect_2d(r, f2) + b * expect_2d(r, g2), abs=1e-12)

    def test_constant_integrands_broadcast(self):
        r = make_rule(10)
        assert expect_1d(r, lambda z: 2.0) == pytest.approx(2.0, abs=1e-14)
        assert expect_3d(r, lambda a, b, c: 2.0) == pytest.approx(2.0, abs=1e-14)

    def test_non_finite_reports_node(self):
        r = make_rule(4)
        with pytest.raises(NonFiniteIntegrand) as info:
            expect_1d(r, lambda z: np.where(z > 1, np.inf, z))
        assert info.value.node > 1
        with pytest.raises(NonFiniteIntegrand) as info:
            expect_2d(r, lambda a, b: np.where((a < 0) & (b > 0), np.nan, 0.0))
        a, b = info.value.node
        assert a < 0 < b
