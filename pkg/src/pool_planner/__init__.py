"""Cost, variance and optimal selection of nested pool-testing strategies."""

from .cost import CostReport, cost, dorfman_cost, variance_geometric, variance_two_stage
from .optimizer import (
    conjecture_sweep,
    conjectured_optimal,
    exhaustive_optimal,
    four_candidate_optimal,
    stage_count,
    stage_count_interval,
    transition_constants,
    transition_table,
)
from .strategies import NestedStrategy, Prevalence, family, make_strategy, multipliers

__version__ = "0.1.0"
