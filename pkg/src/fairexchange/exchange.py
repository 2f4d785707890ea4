"""Transaction pricing, trade execution and the net-cost ledger."""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from fairexchange.errors import ConfigurationError, ContractViolation
from fairexchange.market import Agent, Population, draw_disutility, evaluate_utilities, net_costs
from fairexchange.matching.graph import CentralPlan, check_plan

Mode = Literal["centralized", "decentralized"]
MODES: tuple[str, ...] = ("centralized", "decentralized")


@dataclass(frozen=True)
class ExecutedTrade:
    buyer: int
    intermediary: int
    m: float
    buyer_disutility: float
    intermediary_disutility: float


@dataclass(frozen=True)
class LedgerOutcome:
    trades: tuple[ExecutedTrade, ...]
    net_costs: np.ndarray
    system_revenue: float
    mode: str


def check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ConfigurationError(f"mode {mode!r} not one of {MODES}")


def nash_bargaining_price(
    p_u: float, p_v: float, eps_u: float, eps_v: float, gamma: float
) -> float | None:
    """Price maximizing the product of both parties' gains, or None.

    The product ``(p_u - eps_u - m) * ((1 - gamma) m - p_v - eps_v)`` is a
    downward parabola in ``m`` whose roots are the two reservation prices,
    so its maximizer is their midpoint. No agreement when the buyer's
    reservation price does not exceed the intermediary's.
    """
    if not gamma < 1:
        raise ConfigurationError(f"gamma must be < 1, got {gamma}")
    buyer_max = p_u - eps_u
    seller_min = (p_v + eps_v) / (1 - gamma)
    if not buyer_max > seller_min:
        return None
    m = 0.5 * (buyer_max + seller_min)
    # guard against rounding at a razor-thin surplus
    if not (p_u - m - eps_u > 0 and m * (1 - gamma) - p_v - eps_v > 0):
        return None
    return m


def draw_interaction_disutilities(
    plan: CentralPlan, pop: Population, rng: np.random.Generator
) -> list[tuple[float, float]]:
    """Fresh ``(eps_buyer, eps_intermediary)`` per interaction, in plan order."""
    agents = pop.agents
    return [
        (draw_disutility(agents[j.buyer], rng), draw_disutility(agents[j.intermediary], rng))
        for j in plan.interactions
    ]


def execute_plan(
    plan: CentralPlan,
    pop: Population,
    mode: str,
    rng: np.random.Generator | None = None,
    draws: Sequence[tuple[float, float]] | None = None,
) -> LedgerOutcome:
    """Run every planned interaction and keep the individually rational ones.

    Centralized mode offers the planned ``m``; decentralized mode replaces
    it with the bargaining price under the same disutility draws. Pass
    ``draws`` to share them between the two modes; otherwise ``rng`` is
    used to draw them here.
    """
    check_mode(mode)
    check_plan(plan, pop)
    if draws is None:
        if rng is None:
            raise ConfigurationError("execute_plan needs either rng or draws")
        draws = draw_interaction_disutilities(plan, pop, rng)
    if len(draws) != len(plan.interactions):
        raise ContractViolation(f"{len(draws)} disutility draws for {len(plan.interactions)} interactions")

    gamma = pop.gamma
    agents = pop.agents
    trades = []
    for j, (eps_b, eps_v) in zip(plan.interactions, draws):
        buyer, inter = agents[j.buyer], agents[j.intermediary]
        if mode == "centralized":
            m = j.m
        else:
            m = nash_bargaining_price(buyer.offered_price, inter.offered_price, eps_b, eps_v, gamma)
            if m is None:
                continue
        u = evaluate_utilities(buyer, inter, m, gamma, eps_b, eps_v)
        if u.buyer_utility > 0 and u.intermediary_utility > 0:
            trades.append(ExecutedTrade(j.buyer, j.intermediary, m, eps_b, eps_v))

    omega = net_costs(pop.prices, ((t.buyer, t.intermediary, t.m) for t in trades), gamma)
    revenue = gamma * sum(t.m for t in trades)
    return LedgerOutcome(tuple(trades), omega, revenue, mode)


def net_cost_of(agent: Agent, trades: Sequence[ExecutedTrade], pop: Population) -> float:
    """Net cost of one agent: what it paid for its unit minus intermediary profit."""
    gamma = pop.gamma
    paid = agent.offered_price
    profit = 0.0
    for t in trades:
        if t.buyer == agent.id:
            paid = t.m
        if t.intermediary == agent.id:
            profit += t.m * (1 - gamma) - agent.offered_price
    return paid - profit


def market_payments(outcome: LedgerOutcome, pop: Population) -> float:
    """Total paid to the market: own price for every unit, bought directly or via an intermediary."""
    p = pop.prices
    bought_via_trade = {t.buyer for t in outcome.trades}
    direct = sum(float(p[a]) for a in range(len(pop)) if a not in bought_via_trade)
    return direct + sum(float(p[t.intermediary]) for t in outcome.trades)


def agent_roles(outcome: LedgerOutcome, n: int) -> list[tuple[str, float | None]]:
    """Per agent: role label and the ``m`` it paid as buyer (if any)."""
    bought = {t.buyer: t.m for t in outcome.trades}
    served = {t.intermediary for t in outcome.trades}
    out = []
    for a in range(n):
        if a in bought and a in served:
            role = "both"
        elif a in bought:
            role = "buyer"
        elif a in served:
            role = "intermediary"
        else:
            role = "none"
        out.append((role, bought.get(a)))
    return out


LEDGER_COLUMNS = ("id", "group", "price", "role", "m", "omega")


def write_ledger(
    outcome: LedgerOutcome, pop: Population, path: str | Path, metadata: str | None = None
) -> None:
    """One row per agent plus a trailing summary row (revenue, trade count)."""
    with open(path, "w", newline="") as fh:
        if metadata:
            fh.write(f"# {metadata}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        for a, (role, m) in zip(pop.agents, agent_roles(outcome, len(pop))):
            w.writerow([a.id, a.group_id, repr(a.offered_price), role,
                        "" if m is None else repr(m), repr(float(outcome.net_costs[a.id]))])
        w.writerow(["summary", "", "", f"revenue={outcome.system_revenue!r}",
                    f"trades={len(outcome.trades)}", outcome.mode])
