"""Exact centralized plans for the mean objectives."""

from __future__ import annotations

import numpy as np

from fairexchange.market import Population
from fairexchange.matching.flow import max_weight_b_matching
from fairexchange.matching.graph import (
    LINEAR_OBJECTIVES,
    CentralPlan,
    Interaction,
    TradeGraph,
    check_objective,
    edge_value_matrix,
    make_plan,
)


def solve_linear_centralized(graph: TradeGraph, pop: Population, objective_label: str) -> CentralPlan:
    """Optimal plan for ``mu_I`` or ``mu_G``.

    Both objectives are linear in every ``m_uv``, so each selected edge sits
    at the interval endpoint chosen by ``edge_value``; what remains is a
    max-weight b-matching over the edge weights.
    """
    check_objective(objective_label, LINEAR_OBJECTIVES)
    best_m, weight = edge_value_matrix(pop, objective_label)
    weight = np.where(graph.adjacency, weight, -np.inf)
    pairs = max_weight_b_matching(weight, pop.capacity)
    interactions = [Interaction(u, v, float(best_m[u, v])) for u, v in pairs]
    return make_plan(interactions, pop, objective_label)
