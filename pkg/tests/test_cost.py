import math

import numpy as np
import pytest

from pool_planner.cost import (
    best_dorfman_pool,
    cost,
    cost_by_terms,
    dorfman_cost,
    stage_gain,
    stage_means,
    variance_geometric,
    variance_two_stage,
)
from pool_planner.errors import (
    InvalidPoolSizeError,
    NonDivisibleError,
    NotDecreasingError,
    OutOfRangeError,
)
from pool_planner.strategies import iter_strategies, make_strategy

PREVALENCES = (0.0, 1e-9, 0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 1.0)


class TestDorfman:
    def test_three(self):
        assert dorfman_cost(3, 0.1) == pytest.approx(1 / 3 + 0.271, rel=1e-14)

    def test_matches_single_stage_cost(self):
        for n in range(2, 40):
            for p in PREVALENCES:
                assert cost(make_strategy([n]), p).cost == pytest.approx(dorfman_cost(n, p), rel=1e-15)

    def test_pool_too_small(self):
        with pytest.raises(InvalidPoolSizeError):
            dorfman_cost(1, 0.1)

    def test_classical_optimum(self):
        n, c = best_dorfman_pool(0.01)
        assert n == 11
        assert c == pytest.approx(0.1956, abs=1e-4)


class TestCost:
    def test_two_stage_example(self):
        report = cost(make_strategy([9, 3]), 0.05)
        assert report.cost == pytest.approx(0.376986, abs=1e-6)
        assert len(report.stage_means) == 3
        assert report.stage_means[0] == pytest.approx(1 / 9)

    def test_abstract_example(self):
        assert cost(make_strategy([27, 9, 3]), 0.02).cost == pytest.approx(0.1980, abs=5e-4)

    def test_zero_prevalence(self):
        report = cost(make_strategy([9, 3]), 0.0)
        assert report.cost == pytest.approx(1 / 9, rel=1e-15)
        assert report.variance_per_pool == 0.0

    def test_individual_testing(self):
        report = cost(make_strategy([]), 0.3)
        assert report.cost == 1.0
        assert report.stage_means == (1.0,)
        assert report.variance_per_pool == 0.0

    def test_certain_infection(self):
        # every pool positive
        assert cost(make_strategy([27, 9, 3]), 1.0).cost == pytest.approx(1 / 27 + 1 / 9 + 1 / 3 + 1)

    def test_stage_means_sum_to_cost(self):
        for s in iter_strategies(40):
            for p in (0.01, 0.2):
                report = cost(s, p)
                assert math.fsum(report.stage_means) == pytest.approx(report.cost, rel=1e-15)

    def test_stage_means_small_p(self):
        # each later stage spends about p * m_{l-1} / m_l tests per individual
        p = 1e-8
        means = stage_means(make_strategy([81, 27, 9, 3]), p)
        assert means[0] == pytest.approx(1 / 81)
        assert means[1:] == pytest.approx((3 * p,) * 4, rel=1e-6)

    def test_rewritten_form(self):
        for s in iter_strategies(36):
            for p in (0.001, 0.05, 0.3):
                assert cost_by_terms(s, p) == pytest.approx(cost(s, p).cost, abs=1e-14)

    def test_cancellation_free_excess(self):
        p = 1e-14
        report = cost(make_strategy([9, 3]), p)
        # tests beyond stage 1 are ~ p (9/3 + 3)
        assert report.excess == pytest.approx(6 * p, rel=1e-9)

    def test_monotone_in_p(self):
        grid = np.linspace(0.0, 1.0, 201)
        for pools in ([3], [9, 3], [36, 9, 3], [16, 4, 2]):
            values = [cost(make_strategy(pools), float(p)).cost for p in grid]
            assert all(a <= b for a, b in zip(values, values[1:]))

    def test_bounds(self):
        for s in iter_strategies(30):
            if s.k == 0:
                continue
            for p in PREVALENCES:
                c = cost(s, p).cost
                assert 1 / s.m1 <= c + 1e-15
                assert c <= 1 / s.m1 + s.k + 1e-12

    def test_bad_prevalence(self):
        with pytest.raises(OutOfRangeError):
            cost(make_strategy([9, 3]), 1.5)


class TestStageGain:
    def test_definition(self):
        p = 0.02
        s = make_strategy([27, 9, 3])
        dropped = make_strategy([9, 3])
        assert stage_gain(s, p) == pytest.approx(cost(s, p).cost - cost(dropped, p).cost, abs=1e-14)

    def test_first_stage_pays_at_low_prevalence(self):
        assert stage_gain(make_strategy([27, 9, 3]), 0.02) < 0


class TestVariance:
    def test_two_stage_example(self):
        assert variance_two_stage(4, 2, 0.5) == pytest.approx(2.484375, rel=1e-14)

    def test_two_stage_via_cost(self):
        assert cost(make_strategy([4, 2]), 0.5).variance_per_pool == pytest.approx(2.484375)

    def test_two_stage_degenerate(self):
        assert variance_two_stage(9, 3, 0.0) == 0.0
        assert variance_two_stage(9, 3, 1.0) == 0.0

    def test_two_stage_validates(self):
        with pytest.raises(NonDivisibleError):
            variance_two_stage(9, 4, 0.1)
        with pytest.raises(NotDecreasingError):
            variance_two_stage(3, 9, 0.1)

    def test_single_stage(self):
        report = cost(make_strategy([3]), 0.1)
        assert report.variance_per_pool == pytest.approx(9 * 0.729 * 0.271)
        assert report.variance_per_individual == pytest.approx(0.729 * 0.271)

    @pytest.mark.parametrize("mu", [2, 3, 4, 5])
    @pytest.mark.parametrize("p", [0.01, 0.1, 0.3, 0.7])
    def test_geometric_matches_two_stage(self, mu, p):
        assert variance_geometric(2, mu, p) == pytest.approx(variance_two_stage(mu * mu, mu, p), rel=1e-10)

    @pytest.mark.parametrize("p", [0.05, 0.5])
    def test_geometric_one_stage(self, p):
        q = 1 - p
        assert variance_geometric(1, 3, p) == pytest.approx(9 * q**3 * (1 - q**3), rel=1e-12)

    def test_geometric_errors(self):
        with pytest.raises(OutOfRangeError):
            variance_geometric(0, 3, 0.1)
        with pytest.raises(InvalidPoolSizeError):
            variance_geometric(2, 1, 0.1)

    def test_non_geometric_long_chain_has_no_closed_form(self):
        assert cost(make_strategy([36, 9, 3]), 0.1).variance_per_pool is None
        assert cost(make_strategy([36, 9, 3]), 0.1).variance_per_individual is None

    def test_geometric_chain_reported(self):
        report = cost(make_strategy([8, 4, 2]), 0.3)
        assert report.variance_per_pool == pytest.approx(variance_geometric(3, 2, 0.3))
