"""
Linearized cost of nested strategies with real-valued pool sizes.

Replacing ``1 - q**m`` by ``m p`` gives

    L_k(m, p) = 1/m1 + m_k p + p * sum_{j=2..k} m_{j-1} / m_j,

an upper bound of the exact cost that is minimised in closed form: geometric
pools ``m_j = p**(-(k-j+1)/(k+1))`` and, over real k, ``k = log(1/p) - 1``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .cost import cost
from .errors import EmptyStrategyError, InvalidPoolsError, OutOfRangeError
from .constants import INTEGER_STAGE_TOL
from .strategies import NestedStrategy, PrevalenceLike, as_prevalence

LOG = logging.getLogger(__name__)

LINEAR_P_LIMIT = math.exp(-2.0)


@dataclass(frozen=True)
class LinearizedPlan:
    k: float
    L_value: float
    k_sharp: float
    L_sharp: float
    m_sharp: Tuple[float, ...] = field(default=())


def _check_open_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise OutOfRangeError(f"p must lie in (0, 1), got {p!r}")


def _as_pools(m: Sequence[float]) -> np.ndarray:
    pools = np.asarray(m, dtype=float)
    if pools.ndim != 1 or pools.size == 0:
        raise InvalidPoolsError("pool vector must be a non-empty sequence")
    if np.any(pools < 1.0):
        raise InvalidPoolsError(f"pool sizes must be >= 1, got {tuple(pools)}")
    if np.any(np.diff(pools) >= 0.0):
        raise InvalidPoolsError(f"pool sizes must strictly decrease, got {tuple(pools)}")
    return pools


def linear_cost(m: Sequence[float], p: PrevalenceLike) -> float:
    pools = _as_pools(m)
    p = as_prevalence(p).p
    chain = np.append(pools, 1.0)
    return 1.0 / pools[0] + p * math.fsum(chain[:-1] / chain[1:])


def linear_cost_gradient(m: Sequence[float], p: PrevalenceLike) -> np.ndarray:
    """dL/dm_i = -[i=1]/m1**2 - [i>1] p m_{i-1}/m_i**2 + p/m_{i+1}, m_{k+1} = 1."""
    pools = _as_pools(m)
    p = as_prevalence(p).p
    chain = np.append(pools, 1.0)
    grad = p / chain[1:]
    grad[0] -= 1.0 / pools[0] ** 2
    grad[1:] -= p * pools[:-1] / pools[1:] ** 2
    return grad


def linear_hessian(m: Sequence[float], p: PrevalenceLike) -> np.ndarray:
    """Tridiagonal Hessian of L_k at the pool vector ``m``."""
    pools = _as_pools(m)
    p = as_prevalence(p).p
    k = pools.size
    h = np.zeros((k, k))
    h[0, 0] = 2.0 / pools[0] ** 3
    for i in range(1, k):
        h[i, i] = 2.0 * p * pools[i - 1] / pools[i] ** 3
        h[i - 1, i] = h[i, i - 1] = -p / pools[i] ** 2
    return h


def linear_stage_cost(k: float, p: PrevalenceLike) -> float:
    """Minimum of L_k over real pools, ``(k+1) p**(k/(k+1))``, for real k >= 0."""
    if k < 0:
        raise OutOfRangeError(f"k must be >= 0, got {k}")
    p = as_prevalence(p).p
    return (k + 1.0) * p ** (k / (k + 1.0))


def _sharp_pools(k: int, p: float) -> Tuple[float, ...]:
    return tuple(p ** (-(k - j + 1) / (k + 1)) for j in range(1, k + 1))


def optimal_linear_pools(k: int, p: PrevalenceLike) -> LinearizedPlan:
    p = as_prevalence(p).p
    _check_open_p(p)
    if k < 2:
        raise OutOfRangeError(f"k must be >= 2, got {k}")
    log_inv = -math.log(p)
    return LinearizedPlan(
        k=k,
        L_value=linear_stage_cost(k, p),
        k_sharp=log_inv - 1.0,
        L_sharp=math.e * p * log_inv,
        m_sharp=_sharp_pools(k, p),
    )


def optimal_linear_stages(p: PrevalenceLike) -> LinearizedPlan:
    """
    Real stage count minimising the linearized cost.

    Pools are filled in only when ``log(1/p)`` is an integer u (then k = u - 1).
    """
    p = as_prevalence(p).p
    if not 0.0 < p < LINEAR_P_LIMIT:
        raise OutOfRangeError(f"p must lie in (0, e^-2), got {p!r}")
    u = -math.log(p)
    k_sharp = u - 1.0
    pools: Tuple[float, ...] = ()
    if abs(u - round(u)) <= INTEGER_STAGE_TOL:
        pools = _sharp_pools(round(u) - 1, p)
    plan = LinearizedPlan(
        k=k_sharp,
        L_value=linear_stage_cost(k_sharp, p),
        k_sharp=k_sharp,
        L_sharp=math.e * p * u,
        m_sharp=pools,
    )
    LOG.debug("linearized optimum at p=%.6g: %s", p, plan)
    return plan


def linearization_error_bound(s: NestedStrategy, p: PrevalenceLike) -> Tuple[float, float, float]:
    """(exact, linear, bound) with ``exact <= linear <= exact + bound``."""
    p = as_prevalence(p)
    if p.p > 0.5:
        raise OutOfRangeError(f"p must be <= 1/2, got {p.p!r}")
    if s.k == 0:
        raise EmptyStrategyError("individual testing has no linearization")
    chain = s.chain
    ell = max(a // b for a, b in zip(chain, chain[1:]))
    exact = cost(s, p).cost
    linear = linear_cost(s.pools, p)
    bound = ell * s.m1 * p.neg_log_q**2 + ell * s.k * p.p**2
    return exact, linear, bound


def hessian_quadratic_form(x: Sequence[float], k: int, p: PrevalenceLike) -> Tuple[float, float]:
    """
    ``x^T H x`` at the optimal pools, directly and in telescoped form.

    With ``mu = p**(-1/(k+1))`` and ``y_i = mu**i x_i`` the telescoped form is
    ``mu p**3 (y_1**2 + sum (y_i - y_{i+1})**2 + y_k**2)``.
    """
    plan = optimal_linear_pools(k, p)
    p = as_prevalence(p).p
    x = np.asarray(x, dtype=float)
    if x.shape != (k,):
        raise InvalidPoolsError(f"direction must have {k} entries, got shape {x.shape}")
    direct = float(x @ linear_hessian(plan.m_sharp, p) @ x)
    mu = p ** (-1.0 / (k + 1))
    y = mu ** np.arange(1, k + 1) * x
    telescoped = mu * p**3 * (y[0] ** 2 + float(np.sum(np.diff(y) ** 2)) + y[-1] ** 2)
    return direct, telescoped


def hessian_check(k: int, p: PrevalenceLike, at: Optional[Sequence[float]] = None) -> bool:
    """True when the Hessian of L_k at ``at`` (default: the optimal pools) is positive definite."""
    plan = optimal_linear_pools(k, p)
    point = plan.m_sharp if at is None else at
    try:
        np.linalg.cholesky(linear_hessian(point, p))
    except np.linalg.LinAlgError:
        return False
    return True
