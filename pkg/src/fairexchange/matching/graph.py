"""Trade graph, plans and the per-edge algebra shared by the solvers."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Literal

import numpy as np

from fairexchange.errors import ConfigurationError, ContractViolation
from fairexchange.fairness import fairness_metrics
from fairexchange.market import Agent, Population, net_costs

ObjectiveLabel = Literal["mu_I", "mu_G", "sigma_I", "sigma_G"]
LINEAR_OBJECTIVES = ("mu_I", "mu_G")
QUADRATIC_OBJECTIVES = ("sigma_I", "sigma_G")
OBJECTIVES = LINEAR_OBJECTIVES + QUADRATIC_OBJECTIVES


def check_objective(label: str, allowed: Iterable[str] = OBJECTIVES) -> None:
    allowed = tuple(allowed)
    if label not in allowed:
        raise ConfigurationError(f"objective {label!r} not one of {allowed}")


@dataclass(frozen=True)
class TradeGraph:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    @cached_property
    def adjacency(self) -> np.ndarray:
        n = len(self.nodes)
        adj = np.zeros((n, n), dtype=bool)
        for u, v in self.edges:
            adj[u, v] = True
        adj.flags.writeable = False
        return adj


def build_trade_graph(pop: Population) -> TradeGraph:
    """Directed edge ``u -> v`` for every pair with ``p_u > p_v``."""
    p = pop.prices
    adj = p[:, None] > p[None, :]
    us, vs = np.nonzero(adj)
    return TradeGraph(tuple(range(len(pop))), tuple(zip(us.tolist(), vs.tolist())))


@dataclass(frozen=True)
class Interaction:
    buyer: int
    intermediary: int
    m: float


@dataclass(frozen=True)
class CentralPlan:
    interactions: tuple[Interaction, ...]
    objective_label: str
    objective_value: float

    def as_trades(self) -> list[tuple[int, int, float]]:
        return [(j.buyer, j.intermediary, j.m) for j in self.interactions]


def m_bounds(p_u: float, p_v: float, gamma: float) -> tuple[float, float]:
    """Feasible proposal interval ``[p_v / (1 - gamma), p_u]`` (may be empty)."""
    return p_v / (1 - gamma), p_u


def objective_weights(pop: Population, label: str) -> np.ndarray:
    """Per-agent weight of ``omega`` in a mean objective."""
    n = len(pop)
    if label == "mu_I":
        return np.full(n, 1.0 / n)
    if label == "mu_G":
        w = np.empty(n)
        n_groups = len(pop.groups)
        for ids in pop.groups.values():
            w[list(ids)] = 1.0 / (n_groups * len(ids))
        return w
    raise ConfigurationError(f"{label!r} is not a mean objective")


def _endpoint_choice(w_buyer, w_inter, p_u, p_v, gamma):
    # coefficient of m in the objective; lower bound on ties
    coef = w_buyer - w_inter * (1 - gamma)
    lo = p_v / (1 - gamma)
    gap = p_u - lo
    best_m = np.where(coef < 0, p_u, lo)
    weight = np.maximum(w_buyer, w_inter * (1 - gamma)) * gap
    return best_m, weight


def edge_value(
    buyer: Agent,
    intermediary: Agent,
    gamma: float,
    objective_label: str,
    pop: Population,
) -> tuple[float, float]:
    """Best proposal ``m`` for one edge and the objective decrease it buys.

    For the mean objectives the objective is linear in ``m`` so the best
    ``m`` is an interval endpoint. For the s.d. objectives this returns the
    interval midpoint and a NaN weight. A crossed interval yields a weight
    ``<= 0``.
    """
    check_objective(objective_label)
    if not gamma < 1:
        raise ConfigurationError("gamma must be < 1")
    if not buyer.offered_price > intermediary.offered_price:
        raise ContractViolation(f"{buyer.id}->{intermediary.id} is not a trade edge")
    lo, hi = m_bounds(buyer.offered_price, intermediary.offered_price, gamma)
    if objective_label in QUADRATIC_OBJECTIVES:
        return 0.5 * (lo + hi), math.nan
    w = objective_weights(pop, objective_label)
    best_m, weight = _endpoint_choice(
        w[buyer.id], w[intermediary.id], buyer.offered_price, intermediary.offered_price, gamma
    )
    return float(best_m), float(weight)


def edge_value_matrix(pop: Population, objective_label: str) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``edge_value`` over all ordered pairs.

    Returns ``(best_m, weight)``; ``weight`` is ``-inf`` on non-edges.
    """
    p = pop.prices
    w = objective_weights(pop, objective_label)
    best_m, weight = _endpoint_choice(w[:, None], w[None, :], p[:, None], p[None, :], pop.gamma)
    weight = np.where(p[:, None] > p[None, :], weight, -np.inf)
    return best_m, weight


def plan_net_costs(interactions: Iterable[Interaction], pop: Population) -> np.ndarray:
    """Net costs if every proposed interaction executed at its proposed ``m``."""
    return net_costs(pop.prices, ((j.buyer, j.intermediary, j.m) for j in interactions), pop.gamma)


def objective_of(label: str, omega: np.ndarray, pop: Population) -> float:
    return fairness_metrics(omega, pop.groups).get(label)


def make_plan(interactions: Iterable[Interaction], pop: Population, label: str) -> CentralPlan:
    interactions = tuple(sorted(interactions, key=lambda j: (j.buyer, j.intermediary)))
    value = objective_of(label, plan_net_costs(interactions, pop), pop)
    return CentralPlan(interactions, label, value)


def check_plan(plan: CentralPlan, pop: Population) -> None:
    """Raise ``ContractViolation`` unless the plan is capacity- and price-feasible."""
    n = len(pop)
    p = pop.prices
    buyers = Counter(j.buyer for j in plan.interactions)
    inters = Counter(j.intermediary for j in plan.interactions)
    for j in plan.interactions:
        if not (0 <= j.buyer < n and 0 <= j.intermediary < n):
            raise ContractViolation(f"interaction {j} references an unknown agent")
        if not p[j.buyer] > p[j.intermediary]:
            raise ContractViolation(f"interaction {j} is not a trade edge")
    if buyers and max(buyers.values()) > 1:
        raise ContractViolation("an agent buys in more than one interaction")
    if inters and max(inters.values()) > pop.capacity:
        raise ContractViolation(f"an intermediary exceeds capacity {pop.capacity}")


def check_plan_prices(plan: CentralPlan, pop: Population, tol: float = 1e-12) -> None:
    p = pop.prices
    for j in plan.interactions:
        lo, hi = m_bounds(p[j.buyer], p[j.intermediary], pop.gamma)
        if not (lo - tol <= j.m <= hi + tol):
            raise ContractViolation(f"interaction {j} proposes m outside [{lo}, {hi}]")


def write_plan(plan: CentralPlan, path: str | Path) -> None:
    lines = [f"# objective {plan.objective_label} {plan.objective_value!r}", "buyer intermediary m"]
    lines += [f"{j.buyer} {j.intermediary} {j.m!r}" for j in plan.interactions]
    Path(path).write_text("\n".join(lines) + "\n")


def read_plan(path: str | Path) -> CentralPlan:
    label, value = "mu_I", math.nan
    interactions = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if line.startswith("# objective"):
            _, _, label, v = line.split()
            value = float(v)
        elif line and not line.startswith(("#", "buyer")):
            b, v, m = line.split()
            interactions.append(Interaction(int(b), int(v), float(m)))
    return CentralPlan(tuple(interactions), label, value)
