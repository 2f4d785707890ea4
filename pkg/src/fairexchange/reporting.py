"""CSV and plot-data writers for sweep results.

Floats are written with ``repr`` so identical runs give identical bytes.
Every file starts with a ``# config_hash=... seed=...`` comment line.
"""

from __future__ import annotations

import csv
from collections.abc import Mapping
from pathlib import Path

from fairexchange.simulation import QUANTITIES, SweepResult

MODE_TAGS = {"centralized": "C", "decentralized": "D"}


def series_name(objective: str, mode: str) -> str:
    """``mu_I`` + decentralized -> ``mu_I_D``."""
    return f"{objective}_{MODE_TAGS[mode]}"


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_long_csv(path: str | Path, results: Mapping[str, SweepResult], metadata: str) -> None:
    """One row per (series, axis value, replication)."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# {metadata}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "objective", "mode", "axis", "x", "replication", "seed", *QUANTITIES])
        for name, sr in results.items():
            for i, x in enumerate(sr.values):
                for r, rec in enumerate(sr.records[i]):
                    w.writerow([name, sr.objective, sr.mode, sr.axis, _fmt(x), r, sr.seeds[i][r],
                                *(_fmt(rec[q]) for q in QUANTITIES)])


def write_aggregate_csv(path: str | Path, results: Mapping[str, SweepResult], metadata: str) -> None:
    """One row per (series, axis value): mean and population s.d. per quantity."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# {metadata}\n")
        w = csv.writer(fh, lineterminator="\n")
        header = ["series", "objective", "mode", "axis", "x", "replications"]
        for q in QUANTITIES:
            header += [f"{q}_mean", f"{q}_sd"]
        w.writerow(header)
        for name, sr in results.items():
            for row in sr.aggregate():
                cells = [name, sr.objective, sr.mode, sr.axis, _fmt(row["x"]), sr.replications]
                for q in QUANTITIES:
                    cells += [_fmt(row[f"{q}_mean"]), _fmt(row[f"{q}_sd"])]
                w.writerow(cells)


def write_plot_data(path: str | Path, sr: SweepResult, quantity: str, metadata: str) -> None:
    """Whitespace table ``x mean lo hi`` with a one-s.d. band."""
    lines = [f"# {metadata}", f"# quantity={quantity}", "# x mean lo hi"]
    for i, x in enumerate(sr.values):
        mean, sd = sr.mean(i, quantity), sr.sd(i, quantity)
        lines.append(f"{_fmt(x)} {mean!r} {mean - sd!r} {mean + sd!r}")
    Path(path).write_text("\n".join(lines) + "\n")
