"""Pricing algorithms: per-group price distributions and sampling.

A pricing model assigns every consumer group a Normal price distribution.
Draws outside ``(price_floor, price_cap]`` are rejected and redrawn, so the
sampled law is the Normal truncated to that interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fairexchange.errors import ConfigurationError

SYNTHETIC_LEVELS: tuple[float, ...] = (0.05, 0.25, 0.50, 0.75, 0.95)

# (group means, common std dev) per dispersion level
_SYNTHETIC_TABLE: dict[float, tuple[tuple[float, ...], float]] = {
    0.95: ((0.1, 0.3, 0.5, 0.7, 0.9), 3 / 90),
    0.75: ((0.2, 0.35, 0.5, 0.65, 0.8), 3 / 90),
    0.50: ((0.3, 0.4, 0.5, 0.6, 0.7), 2 / 90),
    0.25: ((0.4, 0.45, 0.5, 0.55, 0.6), 1 / 90),
    0.05: ((0.5, 0.5, 0.5, 0.5, 0.5), 1 / 90),
}

FLIGHT_PRICES: tuple[float, ...] = (
    270.45, 271.91, 272.46, 273.01, 274.21, 275.42, 275.82, 276.20, 276.60,
)
# disutility mean ~ U(0, 0.02 * s), sd = 0.01 * s; s = 50 gives U(0, 1) and 0.5
FLIGHT_DISUTILITY_SCALING = 50.0

PRESET_NAMES: tuple[str, ...] = tuple(f"A_{d:.2f}" for d in SYNTHETIC_LEVELS) + ("flight",)

_MAX_REJECTIONS = 1_000_000


@dataclass(frozen=True)
class GroupDistribution:
    group_id: int
    mean: float
    std_dev: float

    def __post_init__(self) -> None:
        if not self.mean > 0:
            raise ConfigurationError(f"group {self.group_id}: mean must be > 0, got {self.mean}")
        if not self.std_dev >= 0:
            raise ConfigurationError(f"group {self.group_id}: std_dev must be >= 0, got {self.std_dev}")


@dataclass(frozen=True)
class PricingModel:
    """Family of per-group price distributions.

    ``disutility_scaling`` converts the unit-price disutility parameters into
    this model's currency; it is 1 for the synthetic models.
    """

    groups: tuple[GroupDistribution, ...]
    price_floor: float = 0.0
    price_cap: float = 1.0
    label: str = "custom"
    disutility_scaling: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.groups:
            raise ConfigurationError("pricing model needs at least one group")
        if not self.price_cap > self.price_floor:
            raise ConfigurationError("price_cap must exceed price_floor")
        ids = [g.group_id for g in self.groups]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate group ids in {ids}")
        for g in self.groups:
            if not (self.price_floor < g.mean <= self.price_cap):
                raise ConfigurationError(
                    f"group {g.group_id}: mean {g.mean} outside ({self.price_floor}, {self.price_cap}]"
                )

    @property
    def group_ids(self) -> tuple[int, ...]:
        return tuple(g.group_id for g in self.groups)

    def group(self, group_id: int) -> GroupDistribution:
        for g in self.groups:
            if g.group_id == group_id:
                return g
        raise KeyError(f"unknown group id {group_id} in model {self.label!r}")


def build_synthetic_model(delta_level: float) -> PricingModel:
    """Five-group model ``A_delta`` with equal overall mean price 0.5."""
    for level in SYNTHETIC_LEVELS:
        if math.isclose(delta_level, level, abs_tol=1e-12):
            means, sd = _SYNTHETIC_TABLE[level]
            groups = tuple(GroupDistribution(i + 1, mu, sd) for i, mu in enumerate(means))
            return PricingModel(groups, 0.0, 1.0, f"A_{level:.2f}")
    valid = ", ".join(f"{d:.2f}" for d in SYNTHETIC_LEVELS)
    raise ConfigurationError(f"unsupported dispersion level {delta_level}; valid levels are {{{valid}}}")


def build_flight_model() -> PricingModel:
    """Nine deterministic airline-ticket prices, one per group."""
    groups = tuple(GroupDistribution(i + 1, p, 0.0) for i, p in enumerate(FLIGHT_PRICES))
    return PricingModel(
        groups,
        price_floor=0.0,
        price_cap=max(FLIGHT_PRICES),
        label="flight",
        disutility_scaling=FLIGHT_DISUTILITY_SCALING,
    )


def preset(name: str) -> PricingModel:
    """Look up a pricing preset by its config name (``A_0.95`` ... ``flight``)."""
    if name == "flight":
        return build_flight_model()
    if name.startswith("A_"):
        try:
            level = float(name[2:])
        except ValueError:
            level = math.nan
        if not math.isnan(level):
            return build_synthetic_model(level)
    raise ConfigurationError(f"unknown pricing preset {name!r}; choose one of {', '.join(PRESET_NAMES)}")


def sample_price(model: PricingModel, group_id: int, rng: np.random.Generator) -> float:
    g = model.group(group_id)
    if g.std_dev == 0:
        return g.mean
    for _ in range(_MAX_REJECTIONS):
        x = float(rng.normal(g.mean, g.std_dev))
        if model.price_floor < x <= model.price_cap:
            return x
    raise RuntimeError(f"rejection sampling for group {group_id} did not terminate")


def dispersion_of(model: PricingModel) -> float:
    """Normalized two-sigma spread of the model's prices.

    ``(max_g(mean + 2 sd) - min_g(mean - 2 sd)) / price_cap``.
    """
    hi = max(g.mean + 2 * g.std_dev for g in model.groups)
    lo = min(g.mean - 2 * g.std_dev for g in model.groups)
    return (hi - lo) / model.price_cap


def load_pricing_model(path: str | Path, label: str | None = None) -> PricingModel:
    """Read a custom model from a whitespace table.

    Lines are ``group_id mean std_dev``; one line ``cap <value>`` sets the
    price cap and an optional ``floor <value>`` the floor. ``#`` starts a
    comment; a header line starting with ``group_id`` is skipped.
    """
    path = Path(path)
    groups: list[GroupDistribution] = []
    cap: float | None = None
    floor = 0.0
    scaling = 1.0
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("group_id"):
            continue
        parts = line.split()
        try:
            if parts[0] == "cap":
                cap = float(parts[1])
            elif parts[0] == "floor":
                floor = float(parts[1])
            elif parts[0] == "disutility_scaling":
                scaling = float(parts[1])
            else:
                gid, mean, sd = parts
                groups.append(GroupDistribution(int(gid), float(mean), float(sd)))
        except (ValueError, IndexError) as exc:
            raise ConfigurationError(f"{path}:{lineno}: cannot parse {raw!r}") from exc
    if cap is None:
        raise ConfigurationError(f"{path}: missing 'cap <value>' line")
    return PricingModel(tuple(groups), floor, cap, label or path.stem, scaling)


def dump_pricing_model(model: PricingModel, path: str | Path) -> None:
    lines = [
        f"# pricing model {model.label}",
        f"cap {model.price_cap!r}",
        f"floor {model.price_floor!r}",
        f"disutility_scaling {model.disutility_scaling!r}",
        "group_id mean std_dev",
    ]
    lines += [f"{g.group_id} {g.mean!r} {g.std_dev!r}" for g in model.groups]
    Path(path).write_text("\n".join(lines) + "\n")
