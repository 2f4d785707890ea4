"""Exhaustive reference solver for tiny instances (test oracle)."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import lsq_linear

from fairexchange.errors import ConfigurationError
from fairexchange.market import Population
from fairexchange.matching.graph import (
    LINEAR_OBJECTIVES,
    CentralPlan,
    Interaction,
    TradeGraph,
    check_objective,
    make_plan,
)

MAX_ORACLE_AGENTS = 8


def _unit_map(pop: Population, label: str) -> np.ndarray:
    """Matrix ``L`` with ``units = L @ omega`` for the objective's scope."""
    n = len(pop)
    if label.endswith("_I"):
        return np.eye(n)
    L = np.zeros((len(pop.groups), n))
    for row, ids in enumerate(pop.groups.values()):
        L[row, list(ids)] = 1.0 / len(ids)
    return L


def _feasible_assignments(graph: TradeGraph, pop: Population) -> np.ndarray:
    """Rows of intermediary-per-buyer (-1 = no trade) meeting capacity."""
    n = len(pop)
    p = pop.prices
    lo_bound = p / (1 - pop.gamma)
    options = []
    for u in range(n):
        opts = [-1] + [v for v in range(n) if graph.adjacency[u, v] and lo_bound[v] <= p[u]]
        options.append(opts)
    rows = np.array(list(itertools.product(*options)), dtype=int).reshape(-1, n)
    ok = np.ones(len(rows), dtype=bool)
    for v in range(n):
        ok &= (rows == v).sum(axis=1) <= pop.capacity
    return rows[ok]


def _omega_batch(rows: np.ndarray, m: np.ndarray, pop: Population) -> np.ndarray:
    p = pop.prices
    omega = np.tile(p, (len(rows), 1))
    idx = np.arange(len(rows))
    for u in range(rows.shape[1]):
        sel = rows[:, u] >= 0
        v = rows[sel, u]
        omega[idx[sel], u] += m[sel, u] - p[u]
        np.add.at(omega, (idx[sel], v), -(m[sel, u] * (1 - pop.gamma) - p[v]))
    return omega


def _linear_value(omega: np.ndarray, L: np.ndarray) -> np.ndarray:
    return (omega @ L.T).mean(axis=1)


def brute_force_plan(
    graph: TradeGraph, pop: Population, objective_label: str, m_mode: str = "optimize"
) -> CentralPlan:
    """Globally optimal plan by enumerating every capacity-feasible matching.

    Mean objectives: each matched edge is tried at both interval endpoints by
    direct objective evaluation (the objective is linear per edge, so the
    per-edge choices are independent). S.d. objectives: the variance is a
    convex quadratic in ``m`` over a box, solved exactly per matching by
    bounded-variable least squares.

    ``m_mode="lower"`` pins every ``m`` at its lower bound instead.
    """
    check_objective(objective_label)
    n = len(pop)
    if n > MAX_ORACLE_AGENTS:
        raise ConfigurationError(f"brute force refuses {n} agents (limit {MAX_ORACLE_AGENTS})")
    if m_mode not in ("optimize", "lower"):
        raise ConfigurationError(f"unknown m_mode {m_mode!r}")
    p = pop.prices
    gamma = pop.gamma
    rows = _feasible_assignments(graph, pop)
    L = _unit_map(pop, objective_label)
    safe = np.maximum(rows, 0)
    lo = np.where(rows >= 0, p[safe] / (1 - gamma), 0.0)
    hi = np.where(rows >= 0, p[None, :].repeat(len(rows), 0), 0.0)

    if objective_label in LINEAR_OBJECTIVES:
        base = _linear_value(_omega_batch(rows, lo, pop), L)
        best_m = lo.copy()
        total = base.copy()
        if m_mode == "optimize":
            for u in range(n):
                m_hi = lo.copy()
                m_hi[:, u] = hi[:, u]
                delta = _linear_value(_omega_batch(rows, m_hi, pop), L) - base
                use_hi = (rows[:, u] >= 0) & (delta < 0)
                best_m[use_hi, u] = hi[use_hi, u]
                total += np.where(use_hi, delta, 0.0)
        best_row = int(np.argmin(total))
        m_best = best_m[best_row]
    else:
        best_var = np.inf
        best_row, m_best = 0, lo[0]
        for r in range(len(rows)):
            var, m_row = _min_variance(rows[r], lo[r], hi[r], pop, L, m_mode)
            if var < best_var - 1e-15:
                best_var, best_row, m_best = var, r, m_row

    row = rows[best_row]
    interactions = [Interaction(u, int(row[u]), float(m_best[u])) for u in range(n) if row[u] >= 0]
    return make_plan(interactions, pop, objective_label)


def _min_variance(row, lo, hi, pop: Population, L: np.ndarray, m_mode: str) -> tuple[float, np.ndarray]:
    """Minimum unit variance for one matching; ``m`` indexed by buyer."""
    n = len(pop)
    p = pop.prices
    gamma = pop.gamma
    buyers = np.flatnonzero(row >= 0)
    # omega = c + B @ m[buyers]
    c = p.copy()
    B = np.zeros((n, buyers.size))
    for col, u in enumerate(buyers):
        v = row[u]
        c[u] -= p[u]
        c[v] += p[v]
        B[u, col] += 1.0
        B[v, col] -= 1 - gamma
    n_units = L.shape[0]
    centre = np.eye(n_units) - 1.0 / n_units
    A = centre @ L @ B / np.sqrt(n_units)
    b = -(centre @ L @ c) / np.sqrt(n_units)
    m = np.zeros(n)
    if buyers.size:
        lb, ub = lo[buyers], hi[buyers]
        x = lb.copy()
        free = ub > lb
        if m_mode == "optimize" and free.any():
            res = lsq_linear(A[:, free], b - A[:, ~free] @ lb[~free], bounds=(lb[free], ub[free]),
                             method="bvls", tol=1e-14)
            x[free] = np.clip(res.x, lb[free], ub[free])
        m[buyers] = x
        r = A @ x - b
    else:
        r = -b
    return float(r @ r), m
