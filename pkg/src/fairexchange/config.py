"""Experiment config files (TOML with [trial], [sweep] and [output] sections)."""

from __future__ import annotations

import hashlib
import json
import re
import secrets
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from fairexchange.errors import ConfigurationError
from fairexchange.exchange import check_mode
from fairexchange.matching.graph import check_objective
from fairexchange.simulation import AXES, DEFAULT_REPLICATIONS, QUANTITIES, TrialConfig, apply_axis

_SECTIONS = {"trial", "sweep", "output"}
_TRIAL_KEYS = {f.name for f in fields(TrialConfig)}
_SWEEP_KEYS = {"axis", "values", "replications", "series"}
_OUTPUT_KEYS = {"dir", "jobs", "plot"}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    base: TrialConfig
    axis: str | None = None
    values: tuple[float, ...] = ()
    replications: int = DEFAULT_REPLICATIONS
    # (objective, mode) per plotted series
    series: tuple[tuple[str, str], ...] = ()
    out_dir: str | None = None
    jobs: int = 0
    plot: str | None = None
    seed_was_chosen: bool = False

    @property
    def config_hash(self) -> str:
        payload = {
            "name": self.name,
            "trial": asdict(self.base),
            "sweep": {"axis": self.axis, "values": list(self.values), "replications": self.replications,
                      "series": [list(s) for s in self.series]},
            "plot": self.plot,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def metadata(self) -> str:
        return f"config_hash={self.config_hash} seed={self.base.seed}"

    def output_dir(self) -> Path:
        return Path(self.out_dir) if self.out_dir else Path("out") / self.name


def _key_line(text: str, section: str | None, key: str) -> int | None:
    """Line number of ``key = ...`` inside ``section`` (None = top level)."""
    current = None
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for lineno, line in enumerate(text.splitlines(), start=1):
        header = re.match(r"^\s*\[([^\]]+)\]", line)
        if header:
            current = header.group(1).strip()
            continue
        if current == section and pattern.match(line):
            return lineno
    return None


def _fail(path: str, text: str, section: str | None, key: str | None, message: str) -> ConfigurationError:
    line = _key_line(text, section, key) if key else None
    where = f"{path}:{line}" if line else str(path)
    return ConfigurationError(f"{where}: {message}")


def parse_experiment(text: str, path: str = "<config>", seed_override: int | None = None) -> ExperimentSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None

    for key in data:
        if key not in _SECTIONS and key != "name":
            raise _fail(path, text, None, key, f"unknown top-level key {key!r}")
    name = data.get("name")
    if not isinstance(name, str) or not name.strip():
        raise _fail(path, text, None, "name", "'name' must be a non-empty string")

    trial: dict[str, Any] = dict(data.get("trial", {}))
    sweep: dict[str, Any] = dict(data.get("sweep", {}))
    output: dict[str, Any] = dict(data.get("output", {}))
    for section, table, allowed in (("trial", trial, _TRIAL_KEYS), ("sweep", sweep, _SWEEP_KEYS),
                                    ("output", output, _OUTPUT_KEYS)):
        for key in table:
            if key not in allowed:
                raise _fail(path, text, section, key, f"unknown key {key!r} in [{section}]")

    seed_was_chosen = False
    if seed_override is not None:
        trial["seed"] = seed_override
    elif "seed" not in trial:
        trial["seed"] = secrets.randbits(63)
        seed_was_chosen = True

    # validate field by field so the message points at the offending line
    base = TrialConfig()
    for key, value in trial.items():
        expected = type(getattr(base, key)) if getattr(base, key) is not None else str
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, expected) or isinstance(value, bool):
            raise _fail(path, text, "trial", key, f"{key} must be {expected.__name__}, got {value!r}")
        try:
            base = replace(base, **{key: value})
        except ConfigurationError as exc:
            raise _fail(path, text, "trial", key, str(exc)) from None

    axis = sweep.get("axis")
    values: tuple[float, ...] = ()
    if axis is not None:
        if axis not in AXES:
            raise _fail(path, text, "sweep", "axis", f"axis must be one of {AXES}, got {axis!r}")
        raw = sweep.get("values")
        if not isinstance(raw, list) or not raw:
            raise _fail(path, text, "sweep", "values" if "values" in sweep else "axis",
                        "sweep values must be a non-empty list")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            raise _fail(path, text, "sweep", "values", "sweep values must be numbers")
        values = tuple(raw)
        for v in values:
            try:
                apply_axis(base, axis, v)
            except ConfigurationError as exc:
                raise _fail(path, text, "sweep", "values", str(exc)) from None
    elif "values" in sweep:
        raise _fail(path, text, "sweep", "values", "values given without an axis")

    replications = sweep.get("replications", DEFAULT_REPLICATIONS)
    if not isinstance(replications, int) or isinstance(replications, bool) or replications < 1:
        raise _fail(path, text, "sweep", "replications", f"replications must be an integer >= 1, got {replications!r}")

    series = []
    for item in sweep.get("series", [f"{base.objective}:{base.mode}"]):
        try:
            objective, mode = str(item).split(":")
            check_objective(objective)
            check_mode(mode)
        except (ValueError, ConfigurationError):
            raise _fail(path, text, "sweep", "series",
                        f"series entries look like 'mu_I:decentralized', got {item!r}") from None
        series.append((objective, mode))

    out_dir = output.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise _fail(path, text, "output", "dir", "dir must be a string")
    jobs = output.get("jobs", 0)
    if not isinstance(jobs, int) or isinstance(jobs, bool) or jobs < 0:
        raise _fail(path, text, "output", "jobs", f"jobs must be an integer >= 0, got {jobs!r}")
    plot = output.get("plot")
    if plot is not None:
        if plot not in QUANTITIES:
            raise _fail(path, text, "output", "plot", f"plot must be one of {QUANTITIES}, got {plot!r}")

    return ExperimentSpec(name.strip(), base, axis, values, replications, tuple(series),
                          out_dir, jobs, plot, seed_was_chosen)


def load_experiment(path: str | Path, seed_override: int | None = None) -> ExperimentSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_experiment(text, str(path), seed_override)
