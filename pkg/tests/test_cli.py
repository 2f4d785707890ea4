import subprocess
import sys
from pathlib import Path

import pytest

from fairexchange.cli import main
from fairexchange.config import load_experiment, parse_experiment
from fairexchange.errors import ConfigurationError

ROOT = Path(__file__).resolve().parents[1]
EXPERIMENTS = ROOT / "experiments"

TINY = """
name = "tiny"

[trial]
n_agents = 12
preset = "A_0.95"
gamma = 0.3
capacity = 2
seed = 5

[sweep]
axis = "k"
values = [1, 2, 4]
replications = 2
series = ["mu_I:decentralized", "mu_I:centralized", "sigma_G:decentralized"]

[output]
jobs = 1
"""


def _write(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.mark.parametrize("name", ["feasibility", "capacity", "revenue", "dispersion", "flight"])
def test_shipped_configs_parse(name):
    spec = load_experiment(EXPERIMENTS / f"{name}.toml")
    assert spec.name == name
    assert spec.values


def test_capacity_config_shape():
    spec = load_experiment(EXPERIMENTS / "capacity.toml")
    assert spec.axis == "k"
    assert list(spec.values) == [1, 2, 4, 8, 16, 32]
    assert len(spec.series) == 8


def test_validation_errors_point_at_the_line():
    text = 'name = "x"\n[trial]\nn_agents = 10\ngamma = 1.2\n'
    with pytest.raises(ConfigurationError, match=r"exp\.toml:4: gamma"):
        parse_experiment(text, "exp.toml")
    with pytest.raises(ConfigurationError, match=r":3:"):
        parse_experiment('name = "x"\n[trial]\ncapacity = "two"\n', "exp.toml")
    with pytest.raises(ConfigurationError, match=r":4: unknown key"):
        parse_experiment('name = "x"\n[trial]\nseed = 1\ncolour = 3\n', "exp.toml")
    with pytest.raises(ConfigurationError, match="line 2"):
        parse_experiment('name = "x"\n[trial\n', "exp.toml")


def test_empty_sweep_values_rejected():
    with pytest.raises(ConfigurationError, match=r":5: sweep values"):
        parse_experiment('name = "x"\n[trial]\nseed = 1\n[sweep]\nvalues = []\naxis = "k"\n', "exp.toml")


def test_bad_sweep_point_rejected():
    text = 'name = "x"\n[trial]\nseed = 1\n[sweep]\naxis = "gamma"\nvalues = [0.2, 1.0]\n'
    with pytest.raises(ConfigurationError, match=r":6: sweep point gamma=1.0"):
        parse_experiment(text, "exp.toml")


def test_missing_seed_is_chosen_and_reported(tmp_path, capsys):
    path = _write(tmp_path, 'name = "noseed"\n[trial]\nn_agents = 6\ncapacity = 1\n')
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    assert "no seed configured; using seed" in capsys.readouterr().out


def test_config_hash_tracks_content():
    a = parse_experiment(TINY)
    b = parse_experiment(TINY.replace("gamma = 0.3", "gamma = 0.31"))
    assert a.config_hash != b.config_hash
    assert a.config_hash == parse_experiment(TINY).config_hash
    assert parse_experiment(TINY, seed_override=9).base.seed == 9


def test_simulate_writes_ledger_and_is_deterministic(tmp_path, capsys):
    path = _write(tmp_path, TINY)
    for out in ("a", "b"):
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path / out)]) == 0
    text = capsys.readouterr().out
    assert "revenue" in text and "mu_I" in text
    a = (tmp_path / "a" / "tiny_ledger.csv").read_bytes()
    assert a == (tmp_path / "b" / "tiny_ledger.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0].startswith("# config_hash=") and "seed=5" in lines[0]
    assert len(lines) == 2 + 12 + 1


def test_simulate_bad_config_exits_nonzero(tmp_path, capsys):
    path = _write(tmp_path, 'name = "x"\n[trial]\ngamma = 1.2\n')
    assert main(["simulate", "--config", str(path)]) != 0
    assert "gamma" in capsys.readouterr().err


def test_sweep_outputs(tmp_path):
    path = _write(tmp_path, TINY)
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(path), "--out", str(out)]) == 0
    dat = sorted(p.name for p in (out / "tiny").glob("*.dat"))
    assert dat == ["mu_I_C.dat", "mu_I_D.dat", "sigma_G_D.dat"]
    rows = [l for l in (out / "tiny" / "mu_I_D.dat").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 3
    x, mean, lo, hi = map(float, rows[0].split())
    assert lo <= mean <= hi and x == 1
    long_lines = (out / "tiny_long.csv").read_text().splitlines()
    assert long_lines[0].startswith("# config_hash=")
    assert len(long_lines) == 2 + 3 * 3 * 2
    agg_lines = (out / "tiny_aggregate.csv").read_text().splitlines()
    assert len(agg_lines) == 2 + 3 * 3


def test_sweep_replications_flag(tmp_path):
    path = _write(tmp_path, TINY)
    out = tmp_path / "r1"
    assert main(["sweep", "--config", str(path), "--out", str(out), "--replications", "1"]) == 0
    assert len((out / "tiny_long.csv").read_text().splitlines()) == 2 + 3 * 3


def test_sweep_without_axis_is_an_error(tmp_path):
    path = _write(tmp_path, 'name = "x"\n[trial]\nseed = 1\n')
    assert main(["sweep", "--config", str(path)]) != 0


def test_verify_exit_status(capsys):
    assert main(["verify", "--trials", "20", "--jobs", "1"]) == 0
    out = capsys.readouterr().out
    assert "mean_bound: 20/20 pass" in out
    assert "claim1 N=5" in out
    assert main(["verify", "--trials", "4", "--jobs", "1", "--inject-fault"]) == 1


def test_flight_command(tmp_path, capsys):
    out = tmp_path / "flight"
    assert main(["flight", "--out", str(out), "--replications", "2", "--jobs", "1"]) == 0
    text = capsys.readouterr().out
    assert "gap pre" in text
    assert (out / "flight" / "mu_I_D.dat").exists()
    assert (out / "flight" / "mu_I_D_gap.dat").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "fairexchange", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("simulate", "sweep", "flight", "verify"):
        assert cmd in res.stdout
    assert "inject" not in res.stdout
