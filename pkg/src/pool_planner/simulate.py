"""
Simulation and exact enumeration of the nested testing procedure.

Both oracles work per initial pool of ``m1`` individuals. Monte Carlo draws
infection statuses from a counter-based SplitMix64 stream: the status of
individual ``i`` in replication ``r`` depends only on ``(seed, r * m1 + i)``,
so chunking and thread count never change a report. Chunk results are merged
as exact integer sums and a histogram of totals, and moments are formed in
rational arithmetic.
"""
from __future__ import annotations

import logging
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from .constants import MAX_ENUMERATION_POOL, MC_CHUNK_CELLS
from .errors import LengthMismatchError, OutOfRangeError, TooLargeError
from .strategies import NestedStrategy, PrevalenceLike, as_prevalence

LOG = logging.getLogger(__name__)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
ENUMERATION_CHUNK = 1 << 16


@dataclass(frozen=True)
class Population:
    """Infection indicators of the ``m1`` individuals of one initial pool."""

    statuses: Tuple[bool, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "statuses", tuple(bool(x) for x in self.statuses))

    def __len__(self) -> int:
        return len(self.statuses)


@dataclass(frozen=True)
class SimulationReport:
    replications: int
    mean_tests_per_pool: float
    mean_tests_per_individual: float
    variance_tests_per_pool: float
    stage_counts: Tuple[float, ...]
    std_error_mean: float
    seed: int
    std_error_variance: float = 0.0
    m1: int = 1

    @property
    def std_error_per_individual(self) -> float:
        return self.std_error_mean / self.m1


# --------------------------------------------------------------------------- #
# The procedure                                                               #
# --------------------------------------------------------------------------- #
def _stage_tests(statuses: np.ndarray, s: NestedStrategy) -> np.ndarray:
    """
    Tests per stage for each row of an ``(N, m1)`` boolean status matrix.

    Stage 1 is the single test of the initial pool. A stage-j pool is tested
    positive iff one of its members is infected, and only then are its
    ``m_j / m_{j+1}`` sub-pools tested at stage j+1.
    """
    n = statuses.shape[0]
    out = np.zeros((n, s.k + 1), dtype=np.int64)
    out[:, 0] = 1
    chain = s.chain
    m1 = s.m1
    for j in range(s.k):
        size = chain[j]
        positive = statuses.reshape(n, m1 // size, size).any(axis=2).sum(axis=1)
        out[:, j + 1] = positive * (size // chain[j + 1])
    return out


def run_procedure(s: NestedStrategy, pop: Population) -> Tuple[int, Tuple[int, ...]]:
    if len(pop) != s.m1:
        raise LengthMismatchError(f"population has {len(pop)} individuals, strategy needs {s.m1}")
    per_stage = _stage_tests(np.array([pop.statuses], dtype=bool), s)[0]
    return int(per_stage.sum()), tuple(int(x) for x in per_stage)


# --------------------------------------------------------------------------- #
# Monte Carlo                                                                 #
# --------------------------------------------------------------------------- #
def _splitmix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _stream_key(seed: int) -> np.uint64:
    return _splitmix(np.array([seed & _MASK64], dtype=np.uint64))[0]


def draw_statuses(key: np.uint64, start: int, stop: int, m1: int, threshold: int) -> np.ndarray:
    """Statuses of replications ``start..stop-1``; infected iff the top 53 bits fall below ``threshold``."""
    rows = np.arange(start, stop, dtype=np.uint64)[:, None] * np.uint64(m1)
    counters = rows + np.arange(m1, dtype=np.uint64)[None, :]
    z = _splitmix(key + counters * _GOLDEN)
    return (z >> np.uint64(11)) < np.uint64(threshold)


@dataclass
class _ChunkResult:
    stage_sums: List[int]
    totals: Counter


def _simulate_chunk(s: NestedStrategy, key: np.uint64, threshold: int, start: int, stop: int) -> _ChunkResult:
    tests = _stage_tests(draw_statuses(key, start, stop, s.m1, threshold), s)
    values, counts = np.unique(tests.sum(axis=1), return_counts=True)
    return _ChunkResult(
        stage_sums=[int(x) for x in tests.sum(axis=0)],
        totals=Counter(dict(zip(values.tolist(), counts.tolist()))),
    )


def _report(histogram: Counter, stage_sums: Sequence[int], replications: int, seed: int, m1: int) -> SimulationReport:
    r = replications
    s1 = sum(v * c for v, c in histogram.items())
    s2 = sum(v * v * c for v, c in histogram.items())
    mean = Fraction(s1, r)
    var = Fraction(r * s2 - s1 * s1, r * (r - 1)) if r > 1 else Fraction(0)
    mu4 = sum(c * (v - mean) ** 4 for v, c in histogram.items()) / r
    se_var = 0.0
    if r > 1:
        se_var = math.sqrt(max(0.0, float((mu4 - var * var * Fraction(r - 3, r - 1)) / r)))
    mean_pool = float(mean)
    return SimulationReport(
        replications=r,
        mean_tests_per_pool=mean_pool,
        mean_tests_per_individual=mean_pool / m1,
        variance_tests_per_pool=float(var),
        stage_counts=tuple(float(Fraction(x, r)) for x in stage_sums),
        std_error_mean=math.sqrt(float(var / r)),
        seed=seed,
        std_error_variance=se_var,
        m1=m1,
    )


def monte_carlo(
    s: NestedStrategy,
    p: PrevalenceLike,
    replications: int,
    seed: int,
    threads: Optional[int] = None,
) -> SimulationReport:
    if replications < 1:
        raise OutOfRangeError(f"replications must be >= 1, got {replications}")
    if s.m1 > MC_CHUNK_CELLS:
        raise TooLargeError(f"initial pool of {s.m1} exceeds the simulation limit of {MC_CHUNK_CELLS}")
    p = as_prevalence(p)
    seed &= _MASK64
    key = _stream_key(seed)
    threshold = int(p.p * 2.0**53)
    step = max(1, MC_CHUNK_CELLS // s.m1)
    bounds = [(a, min(a + step, replications)) for a in range(0, replications, step)]
    workers = threads or os.cpu_count() or 1
    LOG.debug("simulating %s at p=%r: %d replications in %d chunks on %d threads",
              s, p.p, replications, len(bounds), workers)

    histogram: Counter = Counter()
    stage_sums = [0] * (s.k + 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = pool.map(lambda b: _simulate_chunk(s, key, threshold, *b), bounds)
        for chunk in tqdm(results, total=len(bounds), desc="simulate", unit="chunk", leave=False, disable=None):
            histogram.update(chunk.totals)
            stage_sums = [a + b for a, b in zip(stage_sums, chunk.stage_sums)]
    return _report(histogram, stage_sums, replications, seed, s.m1)


# --------------------------------------------------------------------------- #
# Exact enumeration                                                           #
# --------------------------------------------------------------------------- #
def _pattern_weights(infected: np.ndarray, m1: int, p: float) -> np.ndarray:
    if p == 0.0:
        return (infected == 0).astype(float)
    if p == 1.0:
        return (infected == m1).astype(float)
    return np.exp(infected * math.log(p) + (m1 - infected) * math.log1p(-p))


def enumerate_exact(s: NestedStrategy, p: PrevalenceLike) -> Tuple[float, float, Tuple[float, ...]]:
    """
    Mean and variance of the tests spent on one initial pool, and the mean per stage.

    Every one of the ``2**m1`` infection patterns is weighted by
    ``p**infected * q**healthy``.
    """
    m1 = s.m1
    if m1 > MAX_ENUMERATION_POOL:
        raise TooLargeError(f"enumeration needs m1 <= {MAX_ENUMERATION_POOL}, got {m1}")
    p = as_prevalence(p).p
    chain = s.chain
    max_total = 1 + sum(m1 // m for m in chain[1:])
    shifts = np.arange(m1, dtype=np.uint32)

    distribution = np.zeros(max_total + 1)
    stage_parts: List[np.ndarray] = []
    n_patterns = 1 << m1
    for start in range(0, n_patterns, ENUMERATION_CHUNK):
        idx = np.arange(start, min(start + ENUMERATION_CHUNK, n_patterns), dtype=np.uint32)
        statuses = ((idx[:, None] >> shifts[None, :]) & np.uint32(1)).astype(bool)
        weights = _pattern_weights(statuses.sum(axis=1), m1, p)
        tests = _stage_tests(statuses, s)
        distribution += np.bincount(tests.sum(axis=1), weights=weights, minlength=max_total + 1)
        stage_parts.append(weights @ tests)

    totals = np.arange(max_total + 1)
    mean = math.fsum(totals * distribution)
    variance = math.fsum((totals - mean) ** 2 * distribution)
    stage_means = tuple(math.fsum(col) for col in np.array(stage_parts).T)
    return mean, variance, stage_means
