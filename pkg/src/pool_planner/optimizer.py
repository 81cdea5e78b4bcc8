"""
Selection of optimal nested strategies.

Three selectors live here:

* :func:`conjectured_optimal` picks between the m33 and m34 families from the
  closed-form transition points ``lambda_k`` and ``rho_k``;
* :func:`four_candidate_optimal` evaluates the best member of each of the four
  candidate families (m23, m24, m33, m34) and records the gap
  ``phi = min(D33, D34) - min(D23, D24)`` with a rigorous rounding bound;
* :func:`exhaustive_optimal` is a brute-force oracle over every divisor chain.

Transition constants are roots of elementary functions found by bisection on
fixed brackets.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import mpmath
import pandas as pd
from scipy.optimize import bisect
from tqdm import tqdm

from .compensated import Bounded, BoundedSum, bounded_one_minus_exp
from .constants import (
    A1_BRACKET,
    A2_BRACKET,
    ALPHA1_BRACKET,
    ALPHA2_BRACKET,
    BETA_BRACKET,
    BISECT_MAXITER,
    DEFAULT_ROOT_TOL,
    LOG3,
    MAX_STAGES,
    Q_M1_FLOOR,
    RHO0,
    TIE_RTOL,
    UNIT_ROUNDOFF,
    Family,
)
from .cost import CostReport, cost
from .errors import BracketFailureError, OutOfRangeError
from .strategies import (
    NestedStrategy,
    Prevalence,
    PrevalenceLike,
    as_prevalence,
    family,
    iter_strategies,
)

LOG = logging.getLogger(__name__)

INDIVIDUAL = NestedStrategy(())


# --------------------------------------------------------------------------- #
# Transition constants                                                        #
# --------------------------------------------------------------------------- #
def transition_f(a: float) -> float:
    """3**(k-1) * (D_k(m33) - D_k(m34)) as a function of a = 3**(k-1) |log q|."""
    return 1.0 / 12.0 - math.exp(-3.0 * a) + math.exp(-4.0 * a)


def transition_g(a: float) -> float:
    """3**(k-1) * (D_k(m34) - D_{k+1}(m33)) as a function of a."""
    return -7.0 / 36.0 - math.exp(-4.0 * a) + math.exp(-9.0 * a) / 3.0 + math.exp(-3.0 * a)


def _h_gap(x: int, y: int) -> Callable[[float], float]:
    """a -> h_a(x) - h_a(y) with h_a(x) = 1/x - exp(-a x)."""
    return lambda a: (1.0 / x - math.exp(-a * x)) - (1.0 / y - math.exp(-a * y))


@dataclass(frozen=True)
class TransitionConstants:
    alpha1: float
    alpha2: float
    beta: float
    a1: float
    a2: float
    rho0: float = RHO0


def _bisect(f: Callable[[float], float], bracket: Tuple[float, float], tol: float, name: str) -> float:
    lo, hi = bracket
    if math.copysign(1.0, f(lo)) == math.copysign(1.0, f(hi)):
        raise BracketFailureError(f"{name}: f has the same sign at both ends of [{lo}, {hi}]")
    root = bisect(f, lo, hi, xtol=tol * 1e-3, maxiter=BISECT_MAXITER, disp=False)
    residual = abs(f(root))
    LOG.debug("%s = %.17g (residual %.3g)", name, root, residual)
    if residual > tol:
        LOG.warning("%s: residual %.3g exceeds tolerance %.3g", name, residual, tol)
    return root


@lru_cache(maxsize=8)
def transition_constants(tol: float = DEFAULT_ROOT_TOL) -> TransitionConstants:
    if not 0.0 < tol <= 1e-8:
        raise OutOfRangeError(f"tolerance must lie in (0, 1e-8], got {tol}")
    return TransitionConstants(
        alpha1=_bisect(transition_f, ALPHA1_BRACKET, tol, "alpha1"),
        alpha2=_bisect(transition_f, ALPHA2_BRACKET, tol, "alpha2"),
        beta=_bisect(transition_g, BETA_BRACKET, tol, "beta"),
        a1=_bisect(_h_gap(5, 4), A1_BRACKET, tol, "a1"),
        a2=_bisect(_h_gap(4, 3), A2_BRACKET, tol, "a2"),
    )


def lambda_point(k: int) -> float:
    """Prevalence where (k, m33) and (k, m34) cost the same."""
    return -math.expm1(-transition_constants().alpha1 / 3.0 ** (k - 1))


def rho_point(k: int) -> float:
    """Prevalence where (k, m34) and (k+1, m33) cost the same; rho_0 = 1 - 3**(-1/3)."""
    if k == 0:
        return RHO0
    return -math.expm1(-transition_constants().beta / 3.0 ** (k - 1))


class TransitionRow(NamedTuple):
    k: int
    lambda_k: float
    rho_k_minus_1: float


@dataclass(frozen=True)
class TransitionTable:
    rows: Tuple[TransitionRow, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(TransitionRow._fields))


def transition_table(kmax: int) -> TransitionTable:
    if not 1 <= kmax <= 40:
        raise OutOfRangeError(f"kmax must lie in [1, 40], got {kmax}")
    return TransitionTable(
        tuple(TransitionRow(k, lambda_point(k), rho_point(k - 1)) for k in range(1, kmax + 1))
    )


def best_last_multiplier(a: float) -> Optional[int]:
    """
    Integer x >= 2 minimising h_a(x) = 1/x - exp(-a x) subject to h_a(x) <= 0.

    ``a = m2 |log q|``; returns None when no x qualifies, which is always the
    case for a >= 1/e and already happens above log(3)/3.
    """
    if a <= 0.0:
        raise OutOfRangeError(f"a must be positive, got {a}")
    if a >= 1.0 / math.e:
        return None
    best_x, best_h = None, 0.0
    for x in range(2, max(10, math.ceil(10.0 / a)) + 1):
        h = 1.0 / x - math.exp(-a * x)
        if h <= 0.0 and (best_x is None or h < best_h):
            best_x, best_h = x, h
    return best_x


# --------------------------------------------------------------------------- #
# Stage counts                                                                #
# --------------------------------------------------------------------------- #
def _check_pooling_range(p: Prevalence) -> None:
    if not 0.0 < p.p < RHO0:
        raise OutOfRangeError(f"p must lie in (0, {RHO0:.6f}), got {p.p!r}")


def _log3_inverse_log3_q(p: Prevalence) -> float:
    """log_3(1 / |log_3 q|)."""
    return math.log(LOG3 / p.neg_log_q) / LOG3


def _family_code(code: Union[Family, str]) -> Family:
    return Family.M33 if code == "m3" else Family(code)


def stage_count(code: Union[Family, str], p: PrevalenceLike) -> int:
    """Optimal number of stages for the m33 ("m3") or m23 family."""
    code = _family_code(code)
    p = as_prevalence(p)
    _check_pooling_range(p)
    x = _log3_inverse_log3_q(p)
    if code is Family.M33:
        k = math.floor(x)
    elif code is Family.M23:
        k = math.floor(x - math.log(2.0) / LOG3 + 1.0)
    else:
        raise ValueError(f"stage_count takes m33 or m23, got {code.value}")
    return max(1, k)


def stage_count_interval(code: Union[Family, str], p: PrevalenceLike) -> List[int]:
    """Integers k >= 1 in the half-open stage-count interval of m34 or m24."""
    code = _family_code(code)
    p = as_prevalence(p)
    _check_pooling_range(p)
    x = _log3_inverse_log3_q(p)
    slack = 1.0 + math.log(math.log(4.0) / LOG3) / LOG3
    if code is Family.M34:
        lo = x - math.log(4.0) / LOG3
    elif code is Family.M24:
        lo = x - math.log(8.0) / LOG3 + 1.0
    else:
        raise ValueError(f"stage_count_interval takes m34 or m24, got {code.value}")
    hi = lo + slack
    return list(range(max(1, math.floor(lo) + 1), math.floor(hi) + 1))


# --------------------------------------------------------------------------- #
# Certified candidate costs                                                   #
# --------------------------------------------------------------------------- #
def bounded_cost(s: NestedStrategy, p: PrevalenceLike) -> Bounded:
    """Cost of ``s`` with a rigorous bound on its rounding error."""
    p = as_prevalence(p)
    if s.k == 0:
        return Bounded(1.0, 0.0)
    chain = s.chain
    acc = BoundedSum()
    first = 1.0 / chain[0]
    acc.add(first, 2.0 * UNIT_ROUNDOFF * first)
    for ell in range(1, s.k + 1):
        e = bounded_one_minus_exp(chain[ell - 1], p.neg_log_q)
        term = e.value / chain[ell]
        acc.add(term, e.error / chain[ell] + 2.0 * UNIT_ROUNDOFF * term)
    return acc.result()


@dataclass(frozen=True)
class ConjectureRecord:
    p: float
    k23: Optional[int]
    k24: Optional[int]
    k3: Optional[int]
    k34: Optional[int]
    D23: float
    D24: float
    D33: float
    D34: float
    phi: float
    phi_error: float
    sign_certified: bool

    def stage_counts(self) -> Dict[Family, Optional[int]]:
        return {Family.M33: self.k3, Family.M34: self.k34, Family.M23: self.k23, Family.M24: self.k24}

    @property
    def winner(self) -> Family:
        """Cheapest family; ties go to m33, then m34, m23, m24."""
        costs = {Family.M33: self.D33, Family.M34: self.D34, Family.M23: self.D23, Family.M24: self.D24}
        return min(costs, key=lambda f: costs[f])


def _min_bounded(values: Sequence[Bounded]) -> Bounded:
    finite = [b for b in values if math.isfinite(b.value)]
    if not finite:
        return Bounded(math.inf, 0.0)
    return Bounded(min(b.value for b in finite), max(b.error for b in finite))


def candidate_strategy(code: Union[Family, str], k: int) -> Optional[NestedStrategy]:
    """
    Chain compared under ``code`` with ``k`` stages in the four-candidate check.

    The m23 and m24 candidates must start with multiplier 2, so with one stage
    they are (2) and nothing respectively; otherwise this is :func:`family`.
    """
    code = _family_code(code)
    if k == 1 and code is Family.M23:
        return NestedStrategy((2,))
    if k == 1 and code is Family.M24:
        return None
    return family(code, k)


def _best_in(code: Family, ks: Iterable[int], p: Prevalence) -> Tuple[Optional[int], Bounded]:
    best_k, best = None, Bounded(math.inf, 0.0)
    for k in ks:
        s = candidate_strategy(code, k)
        if s is None:
            continue
        b = bounded_cost(s, p)
        if b.value < best.value:
            best_k, best = k, b
    return best_k, best


def evaluate_candidates(p: PrevalenceLike) -> ConjectureRecord:
    """Costs of the four candidate families at their admissible stage counts."""
    p = as_prevalence(p)
    _check_pooling_range(p)
    k23, d23 = _best_in(Family.M23, [stage_count(Family.M23, p)], p)
    k24, d24 = _best_in(Family.M24, stage_count_interval(Family.M24, p), p)
    k3, d33 = _best_in(Family.M33, [stage_count(Family.M33, p)], p)
    k34, d34 = _best_in(Family.M34, stage_count_interval(Family.M34, p), p)

    three = _min_bounded([d33, d34])
    two = _min_bounded([d23, d24])
    diff = three.value - two.value
    gap = Bounded(diff, three.error + two.error + UNIT_ROUNDOFF * abs(diff))
    record = ConjectureRecord(
        p=p.p,
        k23=k23,
        k24=k24,
        k3=k3,
        k34=k34,
        D23=d23.value,
        D24=d24.value,
        D33=d33.value,
        D34=d34.value,
        phi=gap.value,
        phi_error=gap.error,
        sign_certified=gap.certain_sign() != 0,
    )
    LOG.debug("candidates at p=%.17g: %s", p.p, record)
    return record


def four_candidate_optimal(p: PrevalenceLike) -> Tuple[NestedStrategy, CostReport, ConjectureRecord]:
    p = as_prevalence(p)
    record = evaluate_candidates(p)
    winner = record.winner
    s = candidate_strategy(winner, record.stage_counts()[winner])
    return s, cost(s, p), record


def conjecture_sweep(
    j_min: int = 2,
    j_max: int = 51,
    extra_points: Sequence[float] = (),
) -> List[ConjectureRecord]:
    """Candidate records at p = 2**-j for j_min..j_max, then at ``extra_points``."""
    if not 2 <= j_min <= j_max <= 51:
        raise OutOfRangeError(f"need 2 <= jmin <= jmax <= 51, got jmin={j_min}, jmax={j_max}")
    points = [2.0**-j for j in range(j_min, j_max + 1)] + [float(x) for x in extra_points]
    records = []
    for x in tqdm(points, desc="conjecture sweep", unit="p", leave=False, disable=None):
        record = evaluate_candidates(x)
        if not record.sign_certified:
            LOG.warning(
                "phi sign not certified at p=%.17g (phi=%.3g, bound=%.3g)",
                x, record.phi, record.phi_error,
            )
        records.append(record)
    return records


def phi_reference(record: ConjectureRecord, dps: int = 50) -> float:
    """phi recomputed with ``dps`` significant digits for the record's stage counts."""
    with mpmath.workdps(dps):
        q = 1 - mpmath.mpf(record.p)

        def d(code: Family, k: Optional[int]):
            if k is None:
                return mpmath.inf
            chain = candidate_strategy(code, k).chain
            total = mpmath.mpf(1) / chain[0]
            for ell in range(1, len(chain)):
                total += (1 - q ** chain[ell - 1]) / chain[ell]
            return total

        three = min(d(Family.M33, record.k3), d(Family.M34, record.k34))
        two = min(d(Family.M23, record.k23), d(Family.M24, record.k24))
        return float(three - two)


# --------------------------------------------------------------------------- #
# Conjectured optimum                                                         #
# --------------------------------------------------------------------------- #
def conjectured_optimal(p: PrevalenceLike) -> Tuple[NestedStrategy, CostReport]:
    """
    (k, m33) on [lambda_k, rho_{k-1}], (k, m34) on [rho_k, lambda_k).

    Boundary ties resolve to m33; the stage count is capped at MAX_STAGES.
    """
    p = as_prevalence(p)
    if p.p >= RHO0:
        return INDIVIDUAL, cost(INDIVIDUAL, p)
    k = 1
    while k < MAX_STAGES and rho_point(k) >= p.p:
        k += 1
    code = Family.M33 if p.p >= lambda_point(k) else Family.M34
    s = family(code, k)
    return s, cost(s, p)


# --------------------------------------------------------------------------- #
# Brute-force oracle                                                          #
# --------------------------------------------------------------------------- #
def exhaustive_optimal(p: PrevalenceLike, max_m1: int) -> Tuple[NestedStrategy, CostReport]:
    """
    Cheapest strategy among individual testing and every chain with m1 <= max_m1.

    Costs within TIE_RTOL of each other are ties, broken by smaller k and
    then the lexicographically smaller chain.
    """
    if not 2 <= max_m1 <= 2000:
        raise OutOfRangeError(f"max_m1 must lie in [2, 2000], got {max_m1}")
    p = as_prevalence(p)
    excess = [0.0] + [p.one_minus_q_pow(m) for m in range(1, max_m1 + 1)]

    best, best_cost = INDIVIDUAL, 1.0
    for s in tqdm(iter_strategies(max_m1), desc="exhaustive", unit="chain", leave=False, disable=None):
        if s.k == 0:
            continue
        chain = s.chain
        c = math.fsum([1.0 / chain[0]] + [excess[chain[i - 1]] / chain[i] for i in range(1, len(chain))])
        if c < best_cost - TIE_RTOL * best_cost:
            best, best_cost = s, c
        elif abs(c - best_cost) <= TIE_RTOL * best_cost and (s.k, s.pools) < (best.k, best.pools):
            best, best_cost = s, min(c, best_cost)
    LOG.info("exhaustive optimum at p=%.6g over m1<=%d: %s (cost %.12g)", p.p, max_m1, best, best_cost)
    return best, cost(best, p)


# --------------------------------------------------------------------------- #
# Structural checks and bounds                                                #
# --------------------------------------------------------------------------- #
def structural_violations(s: NestedStrategy, p: PrevalenceLike) -> List[str]:
    """Necessary conditions an optimal strategy must meet; returns the broken ones."""
    p = as_prevalence(p)
    if s.k == 0:
        return [] if p.p >= RHO0 else ["individual testing below the pooling threshold"]

    problems = []
    chain = s.chain
    for i in range(s.k):
        term = 1.0 / chain[i] - p.q_pow(chain[i]) / chain[i + 1]
        if term > TIE_RTOL / chain[i]:
            problems.append(f"stage {i + 1} term 1/m - q^m/m_next is positive ({term:.3g})")
    if p.q < 3.0 ** (-1.0 / 3.0) * (1.0 - TIE_RTOL):
        problems.append("q below 3^(-1/3)")
    if p.q_pow(s.m1) < Q_M1_FLOOR * (1.0 - TIE_RTOL):
        problems.append("q^m1 below 3^(-4/3)")

    pi = s.multipliers().pi
    k = s.k
    if pi[-1] not in (3, 4):
        problems.append(f"last multiplier {pi[-1]} is not 3 or 4")
    if k >= 2 and pi[-1] == 4 and pi[-2] == 4:
        problems.append("last two multipliers are (4, 4)")
    if any(a > b for a, b in zip(pi, pi[1:])):
        problems.append(f"multipliers {pi} decrease somewhere")
    if any(a == b == 2 for a, b in zip(pi, pi[1:])):
        problems.append(f"multipliers {pi} contain (2, 2)")
    if any(x == 2 for x in pi[1:]):
        problems.append(f"multiplier 2 after the first position in {pi}")
    if k >= 3 and any(x != 3 for x in pi[1:-1]):
        problems.append(f"middle multipliers of {pi} are not all 3")
    return problems


class TheoremBounds(NamedTuple):
    upper: float
    lower: float
    gap_bound: float


def theorem_bounds(p: PrevalenceLike) -> TheoremBounds:
    """
    Sandwich for the optimal cost and the gap bound for (k3, m33).

    ``upper`` bounds D_{k3}(m33); ``lower`` bounds the optimal cost from below;
    ``gap_bound`` bounds their difference (quadratic remainder 5 p**2).
    """
    p = as_prevalence(p)
    x = p.p
    plog = x * math.log(1.0 / x)
    upper = 3.0 / LOG3 * plog + 6.0 * x
    lower = math.e * plog - 6.0 * x - 4.0 * x * plog - 5.0 * x * x
    gap = (3.0 / LOG3 - math.e) * plog + 12.0 * x + 4.0 * x * plog + 5.0 * x * x
    return TheoremBounds(upper, lower, gap)
