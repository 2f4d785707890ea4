"""Centralized trade planning: graph, exact and heuristic solvers, oracle."""

from fairexchange.matching.graph import (
    LINEAR_OBJECTIVES,
    OBJECTIVES,
    QUADRATIC_OBJECTIVES,
    CentralPlan,
    Interaction,
    TradeGraph,
    build_trade_graph,
    check_plan,
    check_plan_prices,
    edge_value,
    edge_value_matrix,
    m_bounds,
    make_plan,
    plan_net_costs,
    read_plan,
    write_plan,
)
from fairexchange.matching.linear import solve_linear_centralized
from fairexchange.matching.oracle import MAX_ORACLE_AGENTS, brute_force_plan
from fairexchange.matching.quadratic import DEFAULT_BUDGET, solve_quadratic_centralized

__all__ = [
    "DEFAULT_BUDGET",
    "LINEAR_OBJECTIVES",
    "MAX_ORACLE_AGENTS",
    "OBJECTIVES",
    "QUADRATIC_OBJECTIVES",
    "CentralPlan",
    "Interaction",
    "TradeGraph",
    "brute_force_plan",
    "build_trade_graph",
    "check_plan",
    "check_plan_prices",
    "edge_value",
    "edge_value_matrix",
    "m_bounds",
    "make_plan",
    "plan_net_costs",
    "read_plan",
    "write_plan",
    "solve_centralized",
    "solve_linear_centralized",
    "solve_quadratic_centralized",
]


def solve_centralized(graph, pop, objective_label, budget=DEFAULT_BUDGET, rng=None):
    """Dispatch to the exact linear solver or the s.d. heuristic."""
    if objective_label in LINEAR_OBJECTIVES:
        return solve_linear_centralized(graph, pop, objective_label)
    return solve_quadratic_centralized(graph, pop, objective_label, budget=budget, rng=rng)
