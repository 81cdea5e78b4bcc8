import math
from fractions import Fraction

import pytest

from pool_planner.compensated import Bounded, BoundedSum, bounded_one_minus_exp, two_prod, two_sum


class TestErrorFreeTransformations:
    @pytest.mark.parametrize("a, b", [(1.0, 1e-20), (0.1, 0.2), (1e16, 1.0), (-3.5, 3.5000000000000004)])
    def test_two_sum_is_exact(self, a, b):
        s, e = two_sum(a, b)
        assert s == a + b
        assert Fraction(s) + Fraction(e) == Fraction(a) + Fraction(b)

    @pytest.mark.parametrize("a, b", [(3.0, 1 / 3), (0.1, 0.1), (27.0, 0.020202707317519466), (1e8 + 1, 1e8 - 1)])
    def test_two_prod_is_exact(self, a, b):
        p, e = two_prod(a, b)
        assert p == a * b
        assert Fraction(p) + Fraction(e) == Fraction(a) * Fraction(b)


class TestBoundedSum:
    def test_tenths(self):
        acc = BoundedSum()
        for _ in range(10):
            acc.add(0.1)
        total = acc.result()
        assert abs(Fraction(total.value) - 10 * Fraction(0.1)) <= total.error

    def test_cancellation(self):
        acc = BoundedSum()
        for x in (1e16, 1.0, -1e16):
            acc.add(x)
        assert acc.result().value == 1.0

    def test_carries_input_errors(self):
        acc = BoundedSum()
        acc.add(1.0, 1e-10)
        acc.add(2.0, 2e-10)
        assert acc.result().error >= 3e-10

    def test_certain_sign(self):
        assert Bounded(1e-10, 1e-12).certain_sign() == 1
        assert Bounded(-1e-10, 1e-12).certain_sign() == -1
        assert Bounded(1e-13, 1e-12).certain_sign() == 0


class TestBoundedOneMinusExp:
    @pytest.mark.parametrize("m", [1, 3, 27, 3**20, 3**38])
    @pytest.mark.parametrize("p", [2.0**-51, 2.0**-20, 0.01, 0.2])
    def test_encloses_reference(self, m, p):
        neg_log_q = -math.log1p(-p)
        b = bounded_one_minus_exp(m, neg_log_q)
        assert b.value == pytest.approx(-math.expm1(-m * neg_log_q), rel=1e-13)
        assert 0.0 < b.error < 1e-13 * b.value

    def test_zero_pool(self):
        assert bounded_one_minus_exp(0, 0.1) == Bounded(0.0, 0.0)

    def test_certain_infection(self):
        assert bounded_one_minus_exp(3, math.inf) == Bounded(1.0, 0.0)
