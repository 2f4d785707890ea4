"""Max-weight bipartite b-matching as a min-cost flow.

Network: source -> buyer (cap 1, cost 0), buyer -> intermediary (cap 1,
cost -weight), intermediary -> sink (cap ``capacity``, cost 0). Successive
shortest augmenting paths with node potentials keep every reduced cost
non-negative so each path search is a Dijkstra run. Flow value is free:
augmentation stops as soon as the cheapest residual path costs >= 0.

The residual graph is handled densely; arcs are implied by the cost
matrix and the current assignment instead of being stored.
"""

from __future__ import annotations

import numpy as np

_STOP_TOL = 1e-15


def max_weight_b_matching(weight: np.ndarray, capacity: int) -> list[tuple[int, int]]:
    """Pairs ``(buyer, intermediary)`` maximizing total weight.

    Args:
        weight: ``(n_buyers, n_intermediaries)`` array. Entries that are not
            finite and positive are treated as missing arcs.
        capacity: max pairs per intermediary; each buyer takes at most one.

    Ties are broken toward lower indices.
    """
    weight = np.asarray(weight, dtype=float)
    n_b, n_i = weight.shape
    if capacity <= 0 or n_b == 0 or n_i == 0:
        return []
    usable = np.isfinite(weight) & (weight > 0)
    cost = np.where(usable, -weight, np.inf)

    assign = np.full(n_b, -1)
    load = np.zeros(n_i, dtype=int)
    pot_b = np.zeros(n_b)
    col_min = cost.min(axis=0)
    pot_i = np.minimum(0.0, np.where(np.isfinite(col_min), col_min, 0.0))
    pot_t = float(pot_i.min())

    while True:
        path = _shortest_path(cost, assign, load, capacity, pot_b, pot_i, pot_t)
        if path is None:
            break
        dist_b, dist_i, dist_t, end, prev_b, prev_i = path
        if dist_t + pot_t >= -_STOP_TOL:
            break
        pot_b += np.minimum(dist_b, dist_t)
        pot_i += np.minimum(dist_i, dist_t)
        pot_t += dist_t
        v = end
        load[v] += 1
        while True:
            u = prev_i[v]
            v_old = prev_b[u]
            assign[u] = v
            if v_old < 0:
                break
            v = v_old

    return [(int(u), int(v)) for u, v in enumerate(assign) if v >= 0]


def _shortest_path(cost, assign, load, capacity, pot_b, pot_i, pot_t):
    n_b, n_i = cost.shape
    inf = np.inf
    dist_b = np.where(assign < 0, -pot_b, inf)
    dist_i = np.full(n_i, inf)
    done_b = np.zeros(n_b, dtype=bool)
    done_i = np.zeros(n_i, dtype=bool)
    prev_b = np.full(n_b, -1)
    prev_i = np.full(n_i, -1)
    dist_t = inf
    end = -1
    red_cols = -pot_i

    while True:
        open_b = np.where(done_b, inf, dist_b)
        open_i = np.where(done_i, inf, dist_i)
        u = int(np.argmin(open_b))
        v = int(np.argmin(open_i))
        db, di = open_b[u], open_i[v]
        # intermediaries first on ties so a free slot ends the search early
        if di <= db:
            if di == inf or di >= dist_t:
                break
            done_i[v] = True
            if load[v] < capacity:
                cand = di + pot_i[v] - pot_t
                if cand < dist_t:
                    dist_t, end = cand, v
            members = np.flatnonzero(assign == v)
            if members.size:
                cand_b = di - cost[members, v] + pot_i[v] - pot_b[members]
                better = (cand_b < dist_b[members]) & ~done_b[members]
                idx = members[better]
                dist_b[idx] = cand_b[better]
                prev_b[idx] = v
        else:
            if db >= dist_t:
                break
            done_b[u] = True
            cand = db + cost[u] + pot_b[u] + red_cols
            if assign[u] >= 0:
                cand[assign[u]] = inf
            better = (cand < dist_i) & ~done_i
            dist_i[better] = cand[better]
            prev_i[better] = u

    if end < 0:
        return None
    return dist_b, dist_i, dist_t, end, prev_b, prev_i
