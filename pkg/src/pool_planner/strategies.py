"""
Nested pooling strategies.

A strategy is a chain of pool sizes ``m1 > m2 > ... > mk > 1`` where each size
is a multiple of the next one. Stage 1 tests one pool of ``m1`` samples, each
positive pool of stage j is split into ``m_j / m_{j+1}`` sub-pools for stage
j+1, and stage k+1 retests the individuals of positive stage-k pools. The
empty chain (k = 0) means every individual is tested on its own.
"""
from __future__ import annotations

import logging
import math
import operator
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterator, Sequence, Tuple, Union

from .constants import INT64_MAX, MAX_STAGES, Family
from .errors import (
    EmptyStrategyError,
    NonDivisibleError,
    NotDecreasingError,
    OutOfRangeError,
    PoolTooSmallError,
    StrategyOverflowError,
)

LOG = logging.getLogger(__name__)


# --------------------------------------------------------------------------- #
# Prevalence                                                                  #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Prevalence:
    """
    Infection probability ``p`` together with ``q = 1 - p`` and ``|log q|``.

    ``|log q|`` is taken from ``log1p`` so it keeps full relative precision for
    tiny ``p``; every ``1 - q**m`` in the package is derived from it through
    :meth:`one_minus_q_pow`.
    """

    p: float

    def __post_init__(self) -> None:
        p = float(self.p)
        if not 0.0 <= p <= 1.0:
            raise OutOfRangeError(f"prevalence must lie in [0, 1], got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @cached_property
    def neg_log_q(self) -> float:
        if self.p == 1.0:
            return math.inf
        return -math.log1p(-self.p)

    def q_pow(self, m: float) -> float:
        """``q**m`` evaluated as ``exp(m log q)``."""
        if m == 0:
            return 1.0
        return math.exp(-m * self.neg_log_q)

    def one_minus_q_pow(self, m: float) -> float:
        """``1 - q**m`` without cancellation (``-expm1(m log q)``)."""
        if m == 0:
            return 0.0
        return -math.expm1(-m * self.neg_log_q)


PrevalenceLike = Union[Prevalence, float]


def as_prevalence(p: PrevalenceLike) -> Prevalence:
    return p if isinstance(p, Prevalence) else Prevalence(p)


# --------------------------------------------------------------------------- #
# Strategies                                                                  #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class Multipliers:
    """Pool-size ratios read from the last stage backwards: ``pi[0] = m_k``."""

    pi: Tuple[int, ...]

    def reconstruct(self) -> Tuple[int, ...]:
        k = len(self.pi)
        return tuple(math.prod(self.pi[: k - i]) for i in range(k))


@dataclass(frozen=True)
class NestedStrategy:
    """Validated pool chain; ``pools == ()`` is individual testing."""

    pools: Tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        pools = tuple(operator.index(m) for m in self.pools)
        for m in pools:
            if m < 2:
                raise PoolTooSmallError(f"pool size {m} is smaller than 2 in {pools}")
            if m > INT64_MAX:
                raise StrategyOverflowError(f"pool size {m} exceeds the 64-bit range")
        for big, small in zip(pools, pools[1:]):
            if big <= small:
                raise NotDecreasingError(f"pool sizes must strictly decrease: {pools}")
            if big % small:
                raise NonDivisibleError(
                    f"pool size {big} is not a multiple of the next pool size {small}"
                )
        object.__setattr__(self, "pools", pools)

    @property
    def k(self) -> int:
        return len(self.pools)

    @property
    def m1(self) -> int:
        """Size of the initial pool (1 for individual testing)."""
        return self.pools[0] if self.pools else 1

    @property
    def chain(self) -> Tuple[int, ...]:
        """Pool sizes with the trailing individual stage ``m_{k+1} = 1``."""
        return self.pools + (1,)

    def multipliers(self) -> Multipliers:
        return multipliers(self)

    def is_geometric(self) -> bool:
        """True when every ratio m_j / m_{j+1} (with m_{k+1} = 1) is the same."""
        if not self.pools:
            return False
        mu = self.pools[-1]
        return all(a == b * mu for a, b in zip(self.chain, self.chain[1:]))

    def pool_labels(self) -> Iterator[Tuple[Tuple[int, ...], int]]:
        """Depth-first ``(label, size)`` pairs: (1), (1, i2), (1, i2, i3), ..."""

        def walk(label: Tuple[int, ...], j: int):
            yield label, self.pools[j]
            if j + 1 < self.k:
                for i in range(1, self.pools[j] // self.pools[j + 1] + 1):
                    yield from walk(label + (i,), j + 1)

        if self.pools:
            yield from walk((1,), 0)

    def __str__(self) -> str:
        if not self.pools:
            return "individual testing"
        return "(" + ",".join(str(m) for m in self.pools) + ")"


def make_strategy(m: Sequence[int]) -> NestedStrategy:
    return NestedStrategy(tuple(m))


def multipliers(s: NestedStrategy) -> Multipliers:
    if s.k == 0:
        raise EmptyStrategyError("individual testing has no multipliers")
    chain = s.chain
    # pi_j = m_{k-j+1} / m_{k-j+2}
    pi = tuple(chain[s.k - j] // chain[s.k - j + 1] for j in range(1, s.k + 1))
    return Multipliers(pi)


def family(code: Union[Family, str], k: int) -> NestedStrategy:
    """
    Canonical chain of one of the four candidate families with ``k`` stages.

    For ``k == 1`` the conventions ``(1, m23) = (1, m33) = (3)`` and
    ``(1, m24) = (1, m34) = (4)`` apply.
    """
    code = Family(code)
    if k < 1:
        raise OutOfRangeError(f"a pooled family needs k >= 1, got {k}")
    if k > MAX_STAGES:
        raise StrategyOverflowError(f"k = {k} overflows 64-bit pool sizes (max {MAX_STAGES})")

    if code is Family.M33 or (code is Family.M23 and k == 1):
        pools = tuple(3**j for j in range(k, 0, -1))
    elif code is Family.M34 or (code is Family.M24 and k == 1):
        pools = (4 * 3 ** (k - 1),) + tuple(3**j for j in range(k - 1, 0, -1))
    elif code is Family.M23:
        pools = tuple(2 * 3**j for j in range(k - 1, -1, -1))
    else:
        pools = (8 * 3 ** (k - 2),) + tuple(2 * 3**j for j in range(k - 2, -1, -1))
    return NestedStrategy(pools)


# --------------------------------------------------------------------------- #
# Enumeration                                                                 #
# --------------------------------------------------------------------------- #
@lru_cache(maxsize=None)
def _proper_divisors(n: int) -> Tuple[int, ...]:
    """Divisors d of n with 2 <= d < n, descending."""
    small = [d for d in range(2, math.isqrt(n) + 1) if n % d == 0]
    divs = set(small) | {n // d for d in small}
    divs.discard(n)
    return tuple(sorted(divs, reverse=True))


def _tails(top: int) -> Iterator[Tuple[int, ...]]:
    yield ()
    for d in _proper_divisors(top):
        for tail in _tails(d):
            yield (d,) + tail


def iter_strategies(max_m1: int) -> Iterator[NestedStrategy]:
    """Individual testing, then every divisor chain with ``m1 <= max_m1``."""
    yield NestedStrategy(())
    for m1 in range(2, max_m1 + 1):
        for tail in _tails(m1):
            yield NestedStrategy((m1,) + tail)
