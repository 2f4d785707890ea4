"""Seeded trials, parameter sweeps and executable property checks."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from fairexchange.errors import ConfigurationError, ContractViolation
from fairexchange.exchange import (
    MODES,
    LedgerOutcome,
    check_mode,
    draw_interaction_disutilities,
    execute_plan,
    market_payments,
)
from fairexchange.fairness import METRICS, FairnessReport, fairness_metrics
from fairexchange.market import Population, evaluate_utilities, generate_population, population_from_prices
from fairexchange.matching import (
    DEFAULT_BUDGET,
    OBJECTIVES,
    CentralPlan,
    build_trade_graph,
    solve_centralized,
)
from fairexchange.pricing import PRESET_NAMES, PricingModel, load_pricing_model, preset

AXES = ("k", "gamma", "delta", "N")
DEFAULT_REPLICATIONS = 100
PROPERTY_TOL = 1e-9

# recorded per trial, in CSV column order
QUANTITIES: tuple[str, ...] = (
    *(f"pre_{m}" for m in METRICS),
    *(f"post_{m}" for m in METRICS),
    "revenue",
    "trades",
    "proposed",
    "gap_pre",
    "gap_post",
)


@dataclass(frozen=True)
class TrialConfig:
    n_agents: int = 100
    preset: str = "A_0.95"
    gamma: float = 0.4
    capacity: int = 32
    objective: str = "mu_I"
    mode: str = "decentralized"
    disutility_scale: float = 1.0
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    pricing_file: str | None = None

    def __post_init__(self) -> None:
        if self.n_agents < 2:
            raise ConfigurationError(f"n_agents must be >= 2, got {self.n_agents}")
        if not 0 <= self.gamma < 1:
            raise ConfigurationError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.capacity < 0:
            raise ConfigurationError(f"capacity must be >= 0, got {self.capacity}")
        if self.objective not in OBJECTIVES:
            raise ConfigurationError(f"objective {self.objective!r} not one of {OBJECTIVES}")
        check_mode(self.mode)
        if not 0 <= self.disutility_scale <= 1:
            raise ConfigurationError(f"disutility_scale must lie in [0, 1], got {self.disutility_scale}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed}")
        if self.budget < 0:
            raise ConfigurationError(f"budget must be >= 0, got {self.budget}")
        if self.pricing_file is None and self.preset not in PRESET_NAMES:
            preset(self.preset)  # raises with the list of valid names

    def pricing_model(self) -> PricingModel:
        if self.pricing_file is not None:
            return load_pricing_model(self.pricing_file)
        return preset(self.preset)


@dataclass(frozen=True)
class TrialResult:
    config: TrialConfig
    population: Population
    plan: CentralPlan
    pre: FairnessReport
    post: FairnessReport
    revenue: float
    outcome: LedgerOutcome

    def record(self) -> dict[str, float]:
        p_min = float(self.population.prices.min())
        row = {f"pre_{m}": self.pre.get(m) for m in METRICS}
        row.update({f"post_{m}": self.post.get(m) for m in METRICS})
        row["revenue"] = self.revenue
        row["trades"] = float(len(self.outcome.trades))
        row["proposed"] = float(len(self.plan.interactions))
        row["gap_pre"] = self.pre.mu_individual - p_min
        row["gap_post"] = self.post.mu_individual - p_min
        return row


def _streams(seed: int) -> tuple[np.random.Generator, ...]:
    """Independent population, solver and execution streams."""
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))


def run_paired_trial(config: TrialConfig, modes: Sequence[str] = MODES) -> dict[str, TrialResult]:
    """One population, one plan, one set of disutility draws; executed per mode."""
    for mode in modes:
        check_mode(mode)
    pop_rng, solver_rng, exec_rng = _streams(config.seed)
    pop = generate_population(
        config.n_agents, config.pricing_model(), config.gamma, config.capacity,
        config.disutility_scale, pop_rng,
    )
    plan = solve_centralized(build_trade_graph(pop), pop, config.objective, config.budget, solver_rng)
    draws = draw_interaction_disutilities(plan, pop, exec_rng)
    pre = fairness_metrics(pop.prices, pop.groups)
    out = {}
    for mode in modes:
        outcome = execute_plan(plan, pop, mode, draws=draws)
        post = fairness_metrics(outcome.net_costs, pop.groups)
        out[mode] = TrialResult(replace(config, mode=mode), pop, plan, pre, post, outcome.system_revenue, outcome)
    return out


def run_trial(config: TrialConfig) -> TrialResult:
    return run_paired_trial(config, (config.mode,))[config.mode]


# -- sweeps ---------------------------------------------------------------


def trial_seed(base_seed: int, point: int, replication: int) -> int:
    """Seed for one sweep cell; independent of how many points the sweep has."""
    ss = np.random.SeedSequence([base_seed, point, replication])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def apply_axis(base: TrialConfig, axis: str, value: float) -> TrialConfig:
    try:
        if axis == "k":
            if float(value) != int(value):
                raise ConfigurationError(f"k must be an integer, got {value}")
            return replace(base, capacity=int(value))
        if axis == "gamma":
            return replace(base, gamma=float(value))
        if axis == "delta":
            return replace(base, preset=f"A_{float(value):.2f}", pricing_file=None)
        if axis == "N":
            if float(value) != int(value):
                raise ConfigurationError(f"N must be an integer, got {value}")
            return replace(base, n_agents=int(value))
    except ConfigurationError as exc:
        raise ConfigurationError(f"sweep point {axis}={value}: {exc}") from None
    raise ConfigurationError(f"unknown sweep axis {axis!r}; choose one of {AXES}")


@dataclass
class SweepResult:
    axis: str
    values: tuple[float, ...]
    replications: int
    mode: str
    objective: str
    # records[i][r] is the quantity dict of replication r at values[i]
    records: list[list[dict[str, float]]] = field(repr=False)
    seeds: list[list[int]] = field(repr=False)

    def column(self, point: int, quantity: str) -> np.ndarray:
        return np.array([rec[quantity] for rec in self.records[point]])

    def mean(self, point: int, quantity: str) -> float:
        return float(np.mean(self.column(point, quantity)))

    def sd(self, point: int, quantity: str) -> float:
        return float(np.std(self.column(point, quantity)))

    def aggregate(self) -> list[dict[str, float]]:
        rows = []
        for i, x in enumerate(self.values):
            row = {"x": x}
            for q in QUANTITIES:
                row[f"{q}_mean"] = self.mean(i, q)
                row[f"{q}_sd"] = self.sd(i, q)
            rows.append(row)
        return rows


def _run_cell(task):
    config, modes = task
    return {mode: r.record() for mode, r in run_paired_trial(config, modes).items()}


def run_sweep_modes(
    base: TrialConfig,
    axis: str,
    values: Sequence[float],
    replications: int = DEFAULT_REPLICATIONS,
    modes: Sequence[str] = MODES,
    jobs: int = 1,
) -> dict[str, SweepResult]:
    """Sweep one axis; every mode shares populations, plans and draws."""
    if axis not in AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; choose one of {AXES}")
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    if replications < 1:
        raise ConfigurationError(f"replications must be >= 1, got {replications}")
    configs = [apply_axis(base, axis, v) for v in values]
    seeds = [[trial_seed(base.seed, i, r) for r in range(replications)] for i in range(len(values))]
    tasks = [(replace(c, seed=s), tuple(modes)) for c, row in zip(configs, seeds) for s in row]
    results = _map(_run_cell, tasks, jobs)

    out = {}
    for mode in modes:
        records = [
            [results[i * replications + r][mode] for r in range(replications)] for i in range(len(values))
        ]
        out[mode] = SweepResult(axis, tuple(values), replications, mode, base.objective, records, seeds)
    return out


def run_sweep(
    base: TrialConfig,
    axis: str,
    values: Sequence[float],
    replications: int = DEFAULT_REPLICATIONS,
    jobs: int = 1,
) -> SweepResult:
    return run_sweep_modes(base, axis, values, replications, (base.mode,), jobs)[base.mode]


def _map(fn: Callable, tasks: list, jobs: int) -> list:
    # results come back in task order, so aggregation is reproducible
    if jobs <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# -- properties -----------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    prop: str
    detail: str


def mean_cost_bound(pop: Population, n_trades: int) -> float:
    """Lower bound on mean net cost given the number of executed trades.

    Every unit is bought at no less than the minimum price, and each trade
    adds at least ``gamma * p_min / (1 - gamma)`` of system revenue.
    """
    p_min = float(pop.prices.min())
    return p_min * (1 + pop.gamma * n_trades / (len(pop) * (1 - pop.gamma)))


def single_trade_bound(pop: Population) -> float:
    """The bound with a single trade's revenue; only implied when a trade executes."""
    return mean_cost_bound(pop, 1)


def verify_properties(outcome: LedgerOutcome, pop: Population, tol: float = PROPERTY_TOL) -> list[Violation]:
    """Mean-cost bound, individual rationality and money conservation."""
    found = []
    omega = np.asarray(outcome.net_costs, dtype=float)
    mean_cost = float(omega.mean())
    bound = mean_cost_bound(pop, len(outcome.trades))
    if mean_cost < bound - tol:
        found.append(Violation("mean_bound", f"mean net cost {mean_cost!r} below bound {bound!r}"))

    agents = pop.agents
    for t in outcome.trades:
        try:
            u = evaluate_utilities(agents[t.buyer], agents[t.intermediary], t.m, pop.gamma,
                                   t.buyer_disutility, t.intermediary_disutility)
        except ContractViolation as exc:
            found.append(Violation("ir", str(exc)))
            continue
        if not (u.buyer_utility > 0 and u.intermediary_utility > 0):
            found.append(Violation(
                "ir", f"trade {t.buyer}->{t.intermediary} at m={t.m!r} has utilities "
                      f"({u.buyer_utility!r}, {u.intermediary_utility!r})"))

    expected_revenue = pop.gamma * sum(t.m for t in outcome.trades)
    scale = max(1.0, float(np.abs(pop.prices).sum()))
    if abs(outcome.system_revenue - expected_revenue) > tol * scale:
        found.append(Violation("conservation", f"revenue {outcome.system_revenue!r} != gamma*sum(m) "
                                               f"{expected_revenue!r}"))
    paid = market_payments(outcome, pop)
    if abs(float(omega.sum()) - (paid + outcome.system_revenue)) > tol * scale:
        found.append(Violation("conservation", f"sum of net costs {float(omega.sum())!r} != market "
                                               f"payments {paid!r} + revenue {outcome.system_revenue!r}"))
    return found


def claim1_check(n: int, gamma: float = 0.0) -> float:
    """Optimal individual s.d. with zero disutility and ``k = N - 1``.

    Prices are ``(2i + 1) / (2N)``, so all distinct. With ``gamma = 0`` the
    optimum is zero and anything above ``1e-9`` raises.
    """
    if not 2 <= n <= 12:
        raise ConfigurationError(f"claim1_check needs 2 <= N <= 12, got {n}")
    pop = population_from_prices([(2 * i + 1) / (2 * n) for i in range(n)], gamma, n - 1)
    plan = solve_centralized(build_trade_graph(pop), pop, "sigma_I", DEFAULT_BUDGET, np.random.default_rng(n))
    sigma = plan.objective_value
    if gamma == 0 and sigma > PROPERTY_TOL:
        raise ContractViolation(f"N={n}: optimal individual s.d. {sigma!r} > {PROPERTY_TOL}")
    return sigma


@dataclass
class PropertySuiteReport:
    trials: int = 0
    passes: dict[str, int] = field(default_factory=dict)
    failures: dict[str, int] = field(default_factory=dict)
    examples: list[str] = field(default_factory=list)
    # zero-trade outcomes below the single-trade bound (informational)
    literal_bound_misses: int = 0
    literal_bound_misses_with_trades: int = 0
    zero_trade_outcomes: int = 0

    def count(self, prop: str, ok: bool, detail: str = "") -> None:
        bucket = self.passes if ok else self.failures
        bucket[prop] = bucket.get(prop, 0) + 1
        if not ok and len(self.examples) < 20:
            self.examples.append(f"{prop}: {detail}")

    @property
    def ok(self) -> bool:
        return not any(self.failures.values())

    def lines(self) -> list[str]:
        out = []
        for prop in sorted(set(self.passes) | set(self.failures)):
            n_pass = self.passes.get(prop, 0)
            total = n_pass + self.failures.get(prop, 0)
            out.append(f"{prop}: {n_pass}/{total} pass")
        return out


SUITE_GAMMAS = (0.0, 0.2, 0.4, 0.8)
SUITE_SIZES = (10, 30, 100)
SUITE_BUDGET = 200


def suite_configs(n_trials: int, seed: int = 0) -> list[TrialConfig]:
    """Paired-trial configs cycling through presets, gammas, objectives and sizes.

    Each config yields one outcome per mode, so ``n_trials`` outcomes need
    ``ceil(n_trials / 2)`` configs.
    """
    configs = []
    for i in range(math.ceil(n_trials / len(MODES))):
        name = PRESET_NAMES[i % len(PRESET_NAMES)]
        gamma = SUITE_GAMMAS[(i // len(PRESET_NAMES)) % len(SUITE_GAMMAS)]
        objective = OBJECTIVES[(i // (len(PRESET_NAMES) * len(SUITE_GAMMAS))) % len(OBJECTIVES)]
        n = SUITE_SIZES[i % len(SUITE_SIZES)]
        configs.append(TrialConfig(
            n_agents=n, preset=name, gamma=gamma, capacity=1 + i % 16, objective=objective,
            seed=trial_seed(seed, 0, i), budget=SUITE_BUDGET,
        ))
    return configs


def _suite_cell(config: TrialConfig, fault: bool = False):
    results = run_paired_trial(config)
    cells = []
    for r in results.values():
        outcome = r.outcome
        if fault:
            outcome = replace(outcome, system_revenue=outcome.system_revenue + 1.0)
        violations = verify_properties(outcome, r.population)
        n_trades = len(outcome.trades)
        literal_ok = float(np.mean(outcome.net_costs)) >= single_trade_bound(r.population) - PROPERTY_TOL
        cells.append((violations, n_trades, literal_ok))
    return cells


def _suite_task(task):
    return _suite_cell(*task)


def run_property_suite(
    n_trials: int = 10_000,
    seed: int = 0,
    jobs: int = 1,
    claim1_sizes: Sequence[int] = (2, 5, 8),
    inject_fault: bool = False,
) -> PropertySuiteReport:
    """Mean-cost bound, IR and conservation on every outcome, plus the zero-s.d. claim."""
    report = PropertySuiteReport()
    configs = suite_configs(n_trials, seed)
    cells = _map(_suite_task, [(c, inject_fault) for c in configs], jobs)
    for cell in cells:
        for violations, n_trades, literal_ok in cell:
            if report.trials >= n_trials:
                break
            report.trials += 1
            by_prop = {v.prop: v.detail for v in violations}
            for prop in ("mean_bound", "ir", "conservation"):
                report.count(prop, prop not in by_prop, by_prop.get(prop, ""))
            if n_trades == 0:
                report.zero_trade_outcomes += 1
            if not literal_ok:
                report.literal_bound_misses += 1
                if n_trades:
                    report.literal_bound_misses_with_trades += 1
    for n in claim1_sizes:
        try:
            sigma = claim1_check(n)
            report.count("claim1", True)
        except ContractViolation as exc:
            sigma = math.nan
            report.count("claim1", False, str(exc))
        report.examples.append(f"claim1 N={n}: sigma_I = {sigma!r}")
    return report
