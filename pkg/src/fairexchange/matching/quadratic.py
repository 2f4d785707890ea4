"""Budgeted local search for the standard-deviation objectives.

For a fixed matching the variance of the unit values (agents for
``sigma_I``, group means for ``sigma_G``) is a convex quadratic in the
proposal prices, and convex in each single ``m`` with a closed-form
minimizer. The search alternates exact coordinate descent on ``m`` with
first-improvement moves on the matching: drop a buyer's edge, add one, or
move a buyer to another intermediary.
"""

from __future__ import annotations

import time

import numpy as np

from fairexchange.market import Population
from fairexchange.matching.graph import (
    QUADRATIC_OBJECTIVES,
    CentralPlan,
    Interaction,
    TradeGraph,
    check_objective,
    make_plan,
)
from fairexchange.matching.linear import solve_linear_centralized

DEFAULT_BUDGET = 10_000

_CD_TOL = 1e-14
_IMPROVE_TOL = 1e-15
# below this many candidate edges every evaluation re-converges all of m
_SMALL_INSTANCE_EDGES = 40


class _VarianceSearch:
    """Mutable matching plus incremental variance bookkeeping.

    Each buyer has at most one edge, so edges are keyed by buyer id.
    """

    def __init__(self, pop: Population, label: str, graph: TradeGraph):
        n = len(pop)
        self.n = n
        self.p = pop.prices.tolist()
        self.keep = 1.0 - pop.gamma
        self.capacity = pop.capacity
        if label == "sigma_I":
            self.unit = list(range(n))
            self.scale = [1.0] * n
            self.n_units = n
        else:
            self.unit = [0] * n
            self.scale = [0.0] * n
            for j, ids in enumerate(pop.groups.values()):
                for a in ids:
                    self.unit[a] = j
                    self.scale[a] = 1.0 / len(ids)
            self.n_units = len(pop.groups)
        p = self.p
        adj = graph.adjacency
        self.options = [
            [v for v in range(n) if adj[u, v] and p[v] / self.keep <= p[u]] for u in range(n)
        ]
        self.inter_of = [-1] * n
        self.m_of = [0.0] * n
        self.served: list[set[int]] = [set() for _ in range(n)]
        self.rebuild()

    # -- bookkeeping ---------------------------------------------------
    def rebuild(self) -> None:
        p, keep = self.p, self.keep
        omega = list(p)
        for u in range(self.n):
            v = self.inter_of[u]
            if v >= 0:
                m = self.m_of[u]
                omega[u] += m - p[u]
                omega[v] -= m * keep - p[v]
        y = [0.0] * self.n_units
        for a in range(self.n):
            y[self.unit[a]] += self.scale[a] * omega[a]
        self.shift = sum(y) / self.n_units
        self.y = [val - self.shift for val in y]
        self.s1 = sum(self.y)
        self.s2 = sum(val * val for val in self.y)

    def variance(self) -> float:
        mean = self.s1 / self.n_units
        return max(self.s2 / self.n_units - mean * mean, 0.0)

    def _bump(self, j: int, delta: float) -> None:
        old = self.y[j]
        new = old + delta
        self.y[j] = new
        self.s1 += delta
        self.s2 += new * new - old * old

    def _shift_edge(self, u: int, v: int, dm: float) -> None:
        self._bump(self.unit[u], self.scale[u] * dm)
        self._bump(self.unit[v], -self.keep * self.scale[v] * dm)

    def bounds(self, u: int, v: int) -> tuple[float, float]:
        return self.p[v] / self.keep, self.p[u]

    def set_edge(self, u: int, v: int, m: float) -> None:
        """Point buyer ``u`` at intermediary ``v`` (``-1`` drops it)."""
        p = self.p
        old_v = self.inter_of[u]
        if old_v >= 0:
            old_m = self.m_of[u]
            self._bump(self.unit[u], self.scale[u] * (p[u] - old_m))
            self._bump(self.unit[old_v], self.scale[old_v] * (old_m * self.keep - p[old_v]))
            self.served[old_v].discard(u)
        self.inter_of[u] = v
        if v >= 0:
            self.m_of[u] = m
            self._bump(self.unit[u], self.scale[u] * (m - p[u]))
            self._bump(self.unit[v], -self.scale[v] * (m * self.keep - p[v]))
            self.served[v].add(u)

    # -- coordinate descent -------------------------------------------
    def coordinate_step(self, u: int) -> float:
        v = self.inter_of[u]
        ju, jv = self.unit[u], self.unit[v]
        du = self.scale[u]
        dv = -self.keep * self.scale[v]
        n_units = self.n_units
        if ju == jv:
            d = du + dv
            lin = self.y[ju] * d
            dsum = d
            dsq = d * d
        else:
            lin = self.y[ju] * du + self.y[jv] * dv
            dsum = du + dv
            dsq = du * du + dv * dv
        hess = dsq - dsum * dsum / n_units
        if hess <= 1e-18:
            return 0.0
        grad = lin - self.s1 * dsum / n_units
        m = self.m_of[u]
        lo, hi = self.bounds(u, v)
        target = min(max(m - grad / hess, lo), hi)
        dm = target - m
        if dm == 0.0:
            return 0.0
        self.m_of[u] = target
        self._shift_edge(u, v, dm)
        return abs(dm)

    def descend(self, buyers=None, max_sweeps: int = 10_000) -> None:
        for _ in range(max_sweeps):
            order = buyers if buyers is not None else [u for u in range(self.n) if self.inter_of[u] >= 0]
            moved = 0.0
            for u in order:
                if self.inter_of[u] >= 0:
                    moved = max(moved, self.coordinate_step(u))
            if moved < _CD_TOL:
                break

    # -- snapshots ------------------------------------------------------
    def snapshot(self):
        return (list(self.inter_of), list(self.m_of))

    def restore(self, snap) -> None:
        inter_of, m_of = snap
        self.inter_of = list(inter_of)
        self.m_of = list(m_of)
        self.served = [set() for _ in range(self.n)]
        for u, v in enumerate(self.inter_of):
            if v >= 0:
                self.served[v].add(u)
        self.rebuild()

    def interactions(self) -> list[Interaction]:
        return [Interaction(u, v, self.m_of[u]) for u, v in enumerate(self.inter_of) if v >= 0]


def solve_quadratic_centralized(
    graph: TradeGraph,
    pop: Population,
    objective_label: str,
    budget: int = DEFAULT_BUDGET,
    rng: np.random.Generator | None = None,
    time_limit: float | None = None,
) -> CentralPlan:
    """Best plan found for ``sigma_I``/``sigma_G`` within ``budget`` evaluations.

    Starts from the matching that is optimal for the matching mean objective
    with every ``m`` at its lower bound. ``budget`` counts candidate moves
    evaluated; ``time_limit`` (seconds) optionally caps wall time as well.
    The empty plan is always kept as a fallback, so with a positive budget
    the result is never worse than not trading.
    """
    check_objective(objective_label, QUADRATIC_OBJECTIVES)
    if budget < 0:
        raise ValueError("budget must be >= 0")
    rng = rng if rng is not None else np.random.default_rng(0)
    mean_label = "mu_I" if objective_label == "sigma_I" else "mu_G"
    start = solve_linear_centralized(graph, pop, mean_label)
    start_m = [
        Interaction(j.buyer, j.intermediary, pop.prices[j.intermediary] / (1 - pop.gamma))
        for j in start.interactions
    ]
    if budget == 0:
        return make_plan(start_m, pop, objective_label)

    search = _VarianceSearch(pop, objective_label, graph)
    deadline = None if time_limit is None else time.monotonic() + time_limit

    best_var = search.variance()  # empty plan
    best = search.snapshot()
    for j in start_m:
        search.set_edge(j.buyer, j.intermediary, j.m)
    search.descend()
    search.rebuild()
    current = search.variance()
    if current < best_var - _IMPROVE_TOL:
        best_var, best = current, search.snapshot()

    n_candidates = sum(len(o) for o in search.options)
    thorough = n_candidates <= _SMALL_INSTANCE_EDGES
    evaluations = 0
    while evaluations < budget and n_candidates:
        improved_in_scan = False
        scan_start = evaluations
        moves = [(u, v) for u in range(search.n) for v in [-1, *search.options[u]]]
        for idx in rng.permutation(len(moves)):
            if evaluations >= budget or (deadline is not None and time.monotonic() > deadline):
                break
            u, v = moves[idx]
            old_v = search.inter_of[u]
            if v == old_v or (v >= 0 and len(search.served[v]) >= search.capacity):
                continue
            evaluations += 1
            candidate = _evaluate_move(search, u, v, old_v, thorough)
            if candidate < current - _IMPROVE_TOL:
                search.descend(max_sweeps=10_000 if thorough else 50)
                search.rebuild()
                current = search.variance()
                improved_in_scan = True
                if current < best_var - _IMPROVE_TOL:
                    best_var, best = current, search.snapshot()
        else:
            if evaluations == scan_start:
                break  # no admissible move at all
            if not improved_in_scan:
                _kick(search, rng)
                current = search.variance()
                if current < best_var - _IMPROVE_TOL:
                    best_var, best = current, search.snapshot()
            continue
        break

    search.restore(best)
    return make_plan(search.interactions(), pop, objective_label)


def _evaluate_move(search: _VarianceSearch, u: int, v: int, old_v: int, thorough: bool) -> float:
    """Apply a move, re-optimize nearby prices; undo unless it improves."""
    before = search.variance()
    saved = (list(search.y), search.s1, search.s2)
    touched = {u, v, old_v} - {-1}
    local = set()
    for a in touched:
        local |= search.served[a]
        if search.inter_of[a] >= 0:
            local.add(a)
    saved_m = {b: search.m_of[b] for b in local}
    if v >= 0:
        lo, hi = search.bounds(u, v)
        m0 = min(max(search.m_of[u] if old_v >= 0 else lo, lo), hi)
    else:
        m0 = 0.0
    old_m = search.m_of[u]
    search.set_edge(u, v, m0)
    if v >= 0:
        local.add(u)
        if thorough:
            search.descend()
        else:
            search.coordinate_step(u)
            search.descend(sorted(local), max_sweeps=1)
    after = search.variance()
    if after < before - _IMPROVE_TOL:
        return after
    # undo
    search.inter_of[u] = old_v
    search.m_of[u] = old_m
    if v >= 0:
        search.served[v].discard(u)
    if old_v >= 0:
        search.served[old_v].add(u)
    for b, m in saved_m.items():
        search.m_of[b] = m
    if thorough:
        search.rebuild()
    else:
        search.y, search.s1, search.s2 = saved
    return before


def _kick(search: _VarianceSearch, rng: np.random.Generator, max_moves: int = 3) -> None:
    """Random perturbation out of a local optimum."""
    n_moves = int(rng.integers(1, max_moves + 1))
    for _ in range(n_moves):
        u = int(rng.integers(search.n))
        choices = [v for v in [-1, *search.options[u]]
                   if v != search.inter_of[u] and (v < 0 or len(search.served[v]) < search.capacity)]
        if not choices:
            continue
        v = choices[int(rng.integers(len(choices)))]
        m0 = search.bounds(u, v)[0] if v >= 0 else 0.0
        search.set_edge(u, v, m0)
    search.descend()
    search.rebuild()
