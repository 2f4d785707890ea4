"""Individual and group fairness metrics over per-agent net costs."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from fairexchange.errors import ContractViolation

METRICS = ("mu_I", "sigma_I", "mu_G", "sigma_G")


@dataclass(frozen=True)
class FairnessReport:
    mu_individual: float
    sigma_individual: float
    mu_group: float
    sigma_group: float

    def get(self, label: str) -> float:
        return {
            "mu_I": self.mu_individual,
            "sigma_I": self.sigma_individual,
            "mu_G": self.mu_group,
            "sigma_G": self.sigma_group,
        }[label]

    def as_dict(self) -> dict[str, float]:
        return {label: self.get(label) for label in METRICS}


@dataclass(frozen=True)
class FeasibilityRow:
    metric: str
    pre_trade: float
    post_trade: float
    percent_change: float | None  # None when the pre-trade value is zero
    delta: float


def group_means(net_costs: np.ndarray, groups: Mapping[int, Sequence[int]]) -> np.ndarray:
    return np.array([np.mean(net_costs[list(ids)]) for ids in groups.values()])


def fairness_metrics(net_costs: Sequence[float], groups: Mapping[int, Sequence[int]]) -> FairnessReport:
    """All four metrics with population (not sample) standard deviations.

    ``groups`` maps group id to member agent ids and must partition the
    agents.
    """
    omega = np.asarray(net_costs, dtype=float)
    if omega.size == 0:
        raise ContractViolation("fairness metrics need at least one agent")
    members = [i for ids in groups.values() for i in ids]
    if sorted(members) != list(range(omega.size)) or any(len(ids) == 0 for ids in groups.values()):
        raise ContractViolation("groups must partition the agents into non-empty sets")
    mu_i = float(np.mean(omega))
    sigma_i = float(np.sqrt(np.mean((omega - mu_i) ** 2)))
    mu_g = group_means(omega, groups)
    mu_grp = float(np.mean(mu_g))
    sigma_grp = float(np.sqrt(np.mean((mu_g - mu_grp) ** 2)))
    return FairnessReport(mu_i, sigma_i, mu_grp, sigma_grp)


def feasibility_report(pre: FairnessReport, post: FairnessReport) -> list[FeasibilityRow]:
    """Signed percent change per metric; negative means the metric fell."""
    rows = []
    for label in METRICS:
        a, b = pre.get(label), post.get(label)
        pct = None if a == 0 else 100.0 * (b - a) / a
        rows.append(FeasibilityRow(label, a, b, pct, b - a))
    return rows


def format_percent(row: FeasibilityRow) -> str:
    if row.percent_change is None or not math.isfinite(row.percent_change):
        return "undefined"
    return f"{row.percent_change:+.0f}%"
