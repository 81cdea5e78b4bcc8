"""
Expected cost and variance of nested strategies.

The cost of a strategy is the expected number of tests per individual,

    D_k(m, p) = 1/m1 + (1 - q**m_k) + sum_{j=2..k} (1 - q**m_{j-1}) / m_j,

and each summand is the expected number of tests per individual spent in one
stage. Every ``1 - q**m`` is evaluated as ``-expm1(m log q)`` so costs stay
accurate down to p ~ 1e-16.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .constants import INT64_MAX
from .errors import (
    EmptyStrategyError,
    InvalidPoolSizeError,
    OutOfRangeError,
    StrategyOverflowError,
)
from .strategies import NestedStrategy, PrevalenceLike, as_prevalence

LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostReport:
    cost: float
    stage_means: Tuple[float, ...]
    variance_per_pool: Optional[float]
    m1: int = 1

    @property
    def variance_per_individual(self) -> Optional[float]:
        if self.variance_per_pool is None:
            return None
        return self.variance_per_pool / self.m1**2

    @property
    def excess(self) -> float:
        """Expected tests per individual after the first stage."""
        return math.fsum(self.stage_means[1:])


# --------------------------------------------------------------------------- #
# Dorfman                                                                     #
# --------------------------------------------------------------------------- #
def dorfman_cost(n: int, p: PrevalenceLike) -> float:
    """Dorfman's two-stage cost ``(1 + n (1 - q**n)) / n``."""
    if n < 2:
        raise InvalidPoolSizeError(f"Dorfman pools need n >= 2, got {n}")
    p = as_prevalence(p)
    return 1.0 / n + p.one_minus_q_pow(n)


def best_dorfman_pool(p: PrevalenceLike, max_n: int = 1000) -> Tuple[int, float]:
    """Cheapest single-stage pool size in ``2..max_n`` (smallest n on ties)."""
    p = as_prevalence(p)
    best_n, best = 2, dorfman_cost(2, p)
    for n in range(3, max_n + 1):
        c = dorfman_cost(n, p)
        if c < best:
            best_n, best = n, c
    return best_n, best


# --------------------------------------------------------------------------- #
# Nested strategies                                                           #
# --------------------------------------------------------------------------- #
def stage_means(s: NestedStrategy, p: PrevalenceLike) -> Tuple[float, ...]:
    """E T_k^l / m1 for l = 1..k+1; individual testing is ``(1.0,)``."""
    p = as_prevalence(p)
    if s.k == 0:
        return (1.0,)
    chain = s.chain
    means = [1.0 / chain[0]]
    for ell in range(1, s.k + 1):
        means.append(p.one_minus_q_pow(chain[ell - 1]) / chain[ell])
    return tuple(means)


def cost_by_terms(s: NestedStrategy, p: PrevalenceLike) -> float:
    """The same cost written as ``1 + sum_i (1/m_i - q**m_i / m_{i+1})``."""
    p = as_prevalence(p)
    chain = s.chain
    return 1.0 + math.fsum(
        1.0 / chain[i] - p.q_pow(chain[i]) / chain[i + 1] for i in range(s.k)
    )


def stage_gain(s: NestedStrategy, p: PrevalenceLike) -> float:
    """
    ``D_k(m) - D_{k-1}(m2, ..., mk) = 1/m1 - q**m1 / m2``.

    Negative when the first stage pays for itself.
    """
    if s.k == 0:
        raise EmptyStrategyError("individual testing has no first stage to drop")
    p = as_prevalence(p)
    m1, m2 = s.chain[0], s.chain[1]
    return 1.0 / m1 - p.q_pow(m1) / m2


def variance_two_stage(m1: int, m2: int, p: PrevalenceLike) -> float:
    """Var T_2 for the chain ``(m1, m2)``."""
    NestedStrategy((m1, m2))
    p = as_prevalence(p)
    a, big_a = p.q_pow(m1), p.one_minus_q_pow(m1)
    b, big_b = p.q_pow(m2), p.one_minus_q_pow(m2)
    ratio = m1 / m2
    return (
        ratio * ratio * a * big_a
        + float(m2) * float(m1) * b * big_b
        + 2.0 * (float(m1) * ratio) * a * big_b
    )


def variance_geometric(k: int, mu: int, p: PrevalenceLike) -> float:
    """Var T_k for the constant-ratio chain ``m_j = mu**(k-j+1)``."""
    if k < 1:
        raise OutOfRangeError(f"k must be >= 1, got {k}")
    if mu < 2:
        raise InvalidPoolSizeError(f"ratio must be >= 2, got {mu}")
    if mu**k > INT64_MAX:
        raise StrategyOverflowError(f"{mu}**{k} exceeds the 64-bit range")
    p = as_prevalence(p)

    total = []
    q_prefix = 0.0  # sum_{j<i} q**m_j
    for i in range(1, k + 1):
        m_i = mu ** (k - i + 1)
        q_mi = p.q_pow(m_i)
        total.append(float(mu) ** (i - 1) * p.one_minus_q_pow(m_i) * (q_mi + 2.0 * q_prefix))
        q_prefix += q_mi
    return float(mu * mu) * math.fsum(total)


def _variance(s: NestedStrategy, p) -> Optional[float]:
    if s.k == 0:
        return 0.0
    if s.k == 1:
        m1 = s.pools[0]
        return float(m1) ** 2 * p.q_pow(m1) * p.one_minus_q_pow(m1)
    if s.k == 2:
        return variance_two_stage(s.pools[0], s.pools[1], p)
    if s.is_geometric():
        return variance_geometric(s.k, s.pools[-1], p)
    return None


def cost(s: NestedStrategy, p: PrevalenceLike) -> CostReport:
    p = as_prevalence(p)
    means = stage_means(s, p)
    report = CostReport(
        cost=math.fsum(means),
        stage_means=means,
        variance_per_pool=_variance(s, p),
        m1=s.m1,
    )
    LOG.debug("cost %s at p=%r: %r", s, p.p, report.cost)
    return report
