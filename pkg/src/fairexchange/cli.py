"""Command-line front end: ``simulate``, ``sweep``, ``flight`` and ``verify``."""

from __future__ import annotations

import argparse
import os
import sys
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

from fairexchange.config import ExperimentSpec, load_experiment
from fairexchange.errors import ConfigurationError
from fairexchange.exchange import write_ledger
from fairexchange.fairness import feasibility_report, format_percent
from fairexchange.reporting import series_name, write_aggregate_csv, write_long_csv, write_plot_data
from fairexchange.simulation import (
    TrialConfig,
    run_property_suite,
    run_sweep_modes,
    run_trial,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2

FLIGHT_GAMMAS = (0.005, 0.01, 0.015, 0.02, 0.025, 0.03)
FLIGHT_CAPACITY = 16
FLIGHT_SEED = 2024


def _jobs(requested: int | None, spec_jobs: int = 0) -> int:
    n = requested if requested is not None else spec_jobs
    return n if n and n > 0 else (os.cpu_count() or 1)


def _load(args) -> ExperimentSpec:
    spec = load_experiment(args.config, args.seed)
    if spec.seed_was_chosen:
        print(f"no seed configured; using seed {spec.base.seed}")
    if args.replications is not None:
        if args.replications < 1:
            raise ConfigurationError(f"--replications must be >= 1, got {args.replications}")
        spec = replace(spec, replications=args.replications)
    if args.out is not None:
        spec = replace(spec, out_dir=args.out)
    return spec


def cmd_simulate(args) -> int:
    spec = _load(args)
    result = run_trial(spec.base)
    cfg = spec.base
    print(f"{spec.name}: N={cfg.n_agents} preset={cfg.preset} gamma={cfg.gamma} k={cfg.capacity} "
          f"objective={cfg.objective} mode={cfg.mode} seed={cfg.seed}")
    print(f"{'metric':<8} {'pre':>12} {'post':>12} {'change':>10}")
    for row in feasibility_report(result.pre, result.post):
        print(f"{row.metric:<8} {row.pre_trade:>12.6f} {row.post_trade:>12.6f} {format_percent(row):>10}")
    print(f"revenue {result.revenue:.6f}")
    print(f"trades {len(result.outcome.trades)} of {len(result.plan.interactions)} proposed")
    out = spec.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{spec.name}_ledger.csv"
    write_ledger(result.outcome, result.population, path, spec.metadata())
    print(f"wrote {path}")
    return EXIT_OK


def _run_series(spec: ExperimentSpec, jobs: int) -> dict:
    """Run every (objective, mode) series; modes of one objective share trials."""
    by_objective: dict[str, list[str]] = {}
    for objective, mode in spec.series:
        by_objective.setdefault(objective, []).append(mode)
    results = {}
    for objective, modes in by_objective.items():
        base = replace(spec.base, objective=objective)
        runs = run_sweep_modes(base, spec.axis, spec.values, spec.replications, modes, jobs)
        for mode in modes:
            results[series_name(objective, mode)] = runs[mode]
    return {series_name(o, m): results[series_name(o, m)] for o, m in spec.series}


def _write_sweep(spec: ExperimentSpec, results: dict) -> Path:
    out = spec.output_dir()
    plot_dir = out / spec.name
    plot_dir.mkdir(parents=True, exist_ok=True)
    meta = spec.metadata()
    write_long_csv(out / f"{spec.name}_long.csv", results, meta)
    write_aggregate_csv(out / f"{spec.name}_aggregate.csv", results, meta)
    for name, sr in results.items():
        quantity = spec.plot or f"post_{sr.objective}"
        write_plot_data(plot_dir / f"{name}.dat", sr, quantity, meta)
    return out


def cmd_sweep(args) -> int:
    spec = _load(args)
    if spec.axis is None:
        raise ConfigurationError(f"{args.config}: sweep needs [sweep] axis and values")
    results = _run_series(spec, _jobs(args.jobs, spec.jobs))
    quantity = spec.plot
    for name, sr in results.items():
        q = quantity or f"post_{sr.objective}"
        cells = " ".join(f"{x}:{sr.mean(i, q):.4f}" for i, x in enumerate(sr.values))
        print(f"{name:<10} {q}: {cells}")
    out = _write_sweep(spec, results)
    print(f"wrote {out}")
    return EXIT_OK


def flight_spec(args) -> ExperimentSpec:
    if args.config is not None:
        return _load(args)
    seed = args.seed if args.seed is not None else FLIGHT_SEED
    base = TrialConfig(n_agents=100, preset="flight", gamma=FLIGHT_GAMMAS[0], capacity=FLIGHT_CAPACITY,
                       objective="mu_I", mode="decentralized", seed=seed)
    spec = ExperimentSpec("flight", base, "gamma", FLIGHT_GAMMAS,
                          args.replications or 100, (("mu_I", "decentralized"),), args.out, plot="revenue")
    return spec


def cmd_flight(args) -> int:
    spec = flight_spec(args)
    results = _run_series(spec, _jobs(args.jobs, spec.jobs))
    meta = spec.metadata()
    out = _write_sweep(spec, results)
    print(f"{'series':<10} {'gamma':>7} {'gap pre':>9} {'gap post':>9} {'reduction':>10} {'revenue':>9}")
    for name, sr in results.items():
        for i, g in enumerate(sr.values):
            pre, post = sr.mean(i, "gap_pre"), sr.mean(i, "gap_post")
            red = 100 * (pre - post) / pre if pre else float("nan")
            print(f"{name:<10} {g:>7} {pre:>9.3f} {post:>9.3f} {red:>9.1f}% {sr.mean(i, 'revenue'):>9.2f}")
        write_plot_data(out / spec.name / f"{name}_gap.dat", sr, "gap_post", meta)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    report = run_property_suite(args.trials, args.seed or 0, _jobs(args.jobs), inject_fault=args.inject_fault)
    for line in report.lines():
        print(line)
    print(f"zero-trade outcomes: {report.zero_trade_outcomes}/{report.trials}")
    print(f"single-trade mean bound missed: {report.literal_bound_misses} outcomes "
          f"({report.literal_bound_misses_with_trades} of them with trades)")
    for note in report.examples:
        print(note)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairexchange", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required: bool) -> None:
        p.add_argument("--config", required=config_required, help="experiment TOML file")
        p.add_argument("--out", help="output directory (default out/<name>)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", type=int, help="worker processes (default: all processors)")
        p.add_argument("--replications", type=int, help="override replications per sweep point")

    p = sub.add_parser("simulate", help="run one trial and write the agent ledger")
    common(p, True)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("sweep", help="run a parameter sweep")
    common(p, True)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("flight", help="run the empirical flight-pricing case")
    common(p, False)
    p.set_defaults(func=cmd_flight)
    p = sub.add_parser("verify", help="run the property suite")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
