"""
Error-free transformations and sums with a running rounding-error bound.

``two_sum`` and ``two_prod`` return the rounded result together with the exact
rounding error, so ``a + b == s + e`` and ``a * b == p + e`` hold exactly in
real arithmetic. :class:`BoundedSum` accumulates positive or mixed terms in
double-double form and carries a rigorous bound on the distance between the
returned double and the exact sum of the (exact) quantities the terms stand
for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

from .constants import LIBM_RELERR, UNIT_ROUNDOFF

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a: float, b: float) -> Tuple[float, float]:
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _split(a: float) -> Tuple[float, float]:
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a: float, b: float) -> Tuple[float, float]:
    p = a * b
    if hasattr(math, "fma"):
        return p, math.fma(a, b, -p)
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    err = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo
    return p, err


class Bounded(NamedTuple):
    """A double and an upper bound on its absolute error."""

    value: float
    error: float

    def certain_sign(self) -> int:
        """Sign of the exact quantity when it is decided, else 0."""
        if abs(self.value) > self.error:
            return 1 if self.value > 0 else -1
        return 0


@dataclass
class BoundedSum:
    hi: float = 0.0
    lo: float = 0.0
    error: float = 0.0

    def add(self, value: float, error: float = 0.0) -> None:
        self.hi, e = two_sum(self.hi, value)
        self.lo += e
        # rounding of the low-order accumulator
        self.error += error + UNIT_ROUNDOFF * abs(self.lo)

    def result(self) -> Bounded:
        total = self.hi + self.lo
        return Bounded(total, self.error + UNIT_ROUNDOFF * abs(total))


def bounded_one_minus_exp(m: int, neg_log_q: float) -> Bounded:
    """
    ``1 - exp(-m * neg_log_q)`` with a bound covering libm and product errors.

    The product ``m * neg_log_q`` is kept as an exact double-double and its low
    part enters through the first-order correction ``lo * exp(-hi)``.
    ``neg_log_q`` itself is assumed to carry a relative error of at most
    ``LIBM_RELERR``; since ``x e^-x / (1 - e^-x) <= 1`` that error passes to
    the result at most unchanged.
    """
    if m == 0:
        return Bounded(0.0, 0.0)
    if math.isinf(neg_log_q):
        return Bounded(1.0, 0.0)
    mf = float(m)
    conversion = UNIT_ROUNDOFF if mf != m else 0.0
    hi, lo = two_prod(mf, neg_log_q)
    value = -math.expm1(-hi) + lo * math.exp(-hi)
    relerr = 2.0 * (2.0 * LIBM_RELERR + conversion + 3.0 * UNIT_ROUNDOFF)
    return Bounded(value, relerr * abs(value))
