"""Agent population, disutility draws, utilities and net-cost accounting."""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from fairexchange.errors import ConfigurationError, ContractViolation
from fairexchange.pricing import PricingModel, sample_price

# base disutility parameters in unit-price currency
DISUTILITY_MEAN_HIGH = 0.02
DISUTILITY_SD = 0.01

_MAX_REJECTIONS = 1_000_000


@dataclass(frozen=True)
class Agent:
    id: int
    group_id: int
    offered_price: float
    disutility_mean: float = 0.0
    disutility_sd: float = 0.0
    intermediary_capacity: int = 0

    def __post_init__(self) -> None:
        if not self.offered_price > 0:
            raise ConfigurationError(f"agent {self.id}: offered price must be > 0")
        if self.disutility_mean < 0 or self.disutility_sd < 0:
            raise ConfigurationError(f"agent {self.id}: disutility parameters must be >= 0")
        if self.intermediary_capacity < 0:
            raise ConfigurationError(f"agent {self.id}: capacity must be >= 0")


@dataclass(frozen=True)
class Population:
    """Agents plus the system cut ``gamma``.

    Agent ids are their positions in ``agents``.
    """

    agents: tuple[Agent, ...]
    gamma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", tuple(self.agents))
        if not 0 <= self.gamma < 1:
            raise ConfigurationError(f"gamma must lie in [0, 1), got {self.gamma}")
        for i, a in enumerate(self.agents):
            if a.id != i:
                raise ConfigurationError(f"agent at position {i} has id {a.id}")

    def __len__(self) -> int:
        return len(self.agents)

    @cached_property
    def prices(self) -> np.ndarray:
        p = np.array([a.offered_price for a in self.agents], dtype=float)
        p.flags.writeable = False
        return p

    @cached_property
    def group_ids(self) -> np.ndarray:
        g = np.array([a.group_id for a in self.agents], dtype=int)
        g.flags.writeable = False
        return g

    @cached_property
    def groups(self) -> dict[int, tuple[int, ...]]:
        """Partition of agent ids keyed by group id, in first-seen order."""
        out: dict[int, list[int]] = {}
        for a in self.agents:
            out.setdefault(a.group_id, []).append(a.id)
        return {g: tuple(ids) for g, ids in out.items()}

    @property
    def capacity(self) -> int:
        return self.agents[0].intermediary_capacity if self.agents else 0


@dataclass(frozen=True)
class UtilityPair:
    buyer_utility: float
    intermediary_utility: float
    buyer_disutility_draw: float
    intermediary_disutility_draw: float


def generate_population(
    count: int,
    model: PricingModel,
    gamma: float,
    capacity: int,
    disutility_scale: float,
    rng: np.random.Generator,
) -> Population:
    """Sample ``count`` agents with round-robin group assignment.

    Per agent, in id order: one price draw, then one disutility-mean draw.
    """
    if count < 2:
        raise ConfigurationError(f"population needs at least 2 agents, got {count}")
    if not 0 <= gamma < 1:
        raise ConfigurationError(f"gamma must lie in [0, 1), got {gamma}")
    if capacity < 0:
        raise ConfigurationError(f"capacity must be >= 0, got {capacity}")
    if not 0 <= disutility_scale <= 1:
        raise ConfigurationError(f"disutility_scale must lie in [0, 1], got {disutility_scale}")

    unit = model.disutility_scaling * disutility_scale
    group_ids = model.group_ids
    agents = []
    for i in range(count):
        gid = group_ids[i % len(group_ids)]
        price = sample_price(model, gid, rng)
        eps_mean = float(rng.uniform(0.0, DISUTILITY_MEAN_HIGH)) * unit
        agents.append(Agent(i, gid, price, eps_mean, DISUTILITY_SD * unit, capacity))
    return Population(tuple(agents), gamma)


def population_from_prices(
    prices: Sequence[float],
    gamma: float,
    capacity: int,
    group_ids: Sequence[int] | None = None,
) -> Population:
    """Hand-built population with zero disutility (tests, instance files)."""
    if group_ids is None:
        group_ids = [i + 1 for i in range(len(prices))]
    agents = tuple(
        Agent(i, int(g), float(p), 0.0, 0.0, capacity) for i, (p, g) in enumerate(zip(prices, group_ids))
    )
    return Population(agents, gamma)


def draw_disutility(agent: Agent, rng: np.random.Generator) -> float:
    """One disutility draw, Normal truncated below at zero."""
    if agent.disutility_sd == 0:
        return agent.disutility_mean
    for _ in range(_MAX_REJECTIONS):
        x = float(rng.normal(agent.disutility_mean, agent.disutility_sd))
        if x >= 0:
            return x
    raise RuntimeError(f"disutility draw for agent {agent.id} did not terminate")


def evaluate_utilities(
    buyer: Agent,
    intermediary: Agent,
    m: float,
    gamma: float,
    eps_buyer: float,
    eps_intermediary: float,
) -> UtilityPair:
    if not buyer.offered_price > intermediary.offered_price:
        raise ContractViolation(
            f"no trade edge {buyer.id}->{intermediary.id}: buyer price must exceed intermediary price"
        )
    return UtilityPair(
        buyer_utility=buyer.offered_price - m - eps_buyer,
        intermediary_utility=m * (1 - gamma) - intermediary.offered_price - eps_intermediary,
        buyer_disutility_draw=eps_buyer,
        intermediary_disutility_draw=eps_intermediary,
    )


def net_costs(
    prices: np.ndarray,
    trades: Iterable[tuple[int, int, float]],
    gamma: float,
) -> np.ndarray:
    """Per-agent net cost given executed ``(buyer, intermediary, m)`` trades.

    A buyer pays ``m`` instead of its own price; an intermediary's cost is
    reduced by its profit ``m (1 - gamma) - p_v`` on every trade it serves.
    """
    omega = np.array(prices, dtype=float)
    for b, v, m in trades:
        omega[b] += m - prices[b]
        omega[v] -= m * (1 - gamma) - prices[v]
    return omega


POPULATION_COLUMNS = ("id", "group", "price", "eps_mean", "eps_sd")


def write_population(pop: Population, path: str | Path) -> None:
    """Tabular text dump; header lines carry gamma and capacity."""
    lines = [
        f"# gamma {pop.gamma!r}",
        f"# capacity {pop.capacity}",
        " ".join(POPULATION_COLUMNS),
    ]
    for a in pop.agents:
        lines.append(f"{a.id} {a.group_id} {a.offered_price!r} {a.disutility_mean!r} {a.disutility_sd!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_population(path: str | Path) -> Population:
    gamma = 0.0
    capacity = 0
    agents = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "gamma":
                gamma = float(parts[1])
            elif len(parts) == 2 and parts[0] == "capacity":
                capacity = int(parts[1])
            continue
        if line.startswith("id"):
            continue
        try:
            i, g, p, mu, sd = line.split()
            agents.append((int(i), int(g), float(p), float(mu), float(sd)))
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: cannot parse {raw!r}") from exc
    return Population(tuple(Agent(i, g, p, mu, sd, capacity) for i, g, p, mu, sd in agents), gamma)
