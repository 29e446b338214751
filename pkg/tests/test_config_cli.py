import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from krlab.cli import atomic_write, main
from krlab.config import canonical, dumps_toml, load_config, loads_toml, parse_config
from krlab.errors import ConfigError
from krlab.grid import load_field

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
def test_shipped_configs_round_trip(name):
    raw = loads_toml((CONFIGS / name).read_text())
    assert loads_toml(dumps_toml(raw)) == canonical(raw)
    load_config(CONFIGS / name)


_keys = st.text(alphabet="abcdefgh_", min_size=1, max_size=6)
_scalars = st.one_of(st.integers(-10**6, 10**6), st.floats(allow_nan=False, allow_infinity=False),
                     st.text(max_size=8), st.booleans())
_tables = st.recursive(st.dictionaries(_keys, _scalars, max_size=4),
                       lambda inner: st.dictionaries(_keys, st.one_of(_scalars, inner), max_size=4), max_leaves=12)


@given(_tables)
def test_toml_round_trip_property(raw):
    assert loads_toml(dumps_toml(raw)) == canonical(raw)


def test_canonical_is_sorted():
    c = canonical({"b": 1, "a": {"z": 1, "y": [{"q": 1, "p": 2}]}})
    assert list(c) == ["a", "b"] and list(c["a"]) == ["y", "z"] and list(c["a"]["y"][0]) == ["p", "q"]


@pytest.mark.parametrize(
    "raw, key",
    [({"command": "solve", "bogus": 1}, "bogus"),
     ({"command": "solve", "scenario": {"kappa": -1e-3}}, "scenario.kappa"),
     ({"command": "solve", "scenario": {"n": 100}}, "scenario.n"),
     ({"command": "solve", "scenario": {"n": "64"}}, "scenario.n"),
     ({"command": "fly"}, "command"),
     ({"command": "experiment"}, "sweep"),
     ({"command": "experiment", "sweep": {"channel": "velocity"}}, "sweep.params"),
     ({"command": "distance", "distance": {"first": {}}}, "distance.second"),
     ({"scenario": {}}, "command")],
)
def test_invalid_configs_name_the_key(raw, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(raw)


def test_domain_errors_become_config_errors():
    with pytest.raises(ConfigError):
        parse_config({"command": "experiment", "sweep": {"channel": "velocity", "params": [1.0, 0.5]}})


def test_seed_override():
    raw = loads_toml((CONFIGS / "velocity.toml").read_text())
    assert parse_config(raw, seed=7).sweep.seed == 7


def test_negative_kappa_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, 'command = "solve"\n[scenario]\ndim = 1\nn = 64\nkappa = -0.001\n')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "scenario.kappa" in capsys.readouterr().err
    assert not (tmp_path / "o" / "report.json").exists()


def test_missing_config_exit_code(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.toml")]) == 1


def test_bad_toml_exit_code(tmp_path):
    assert main(["run", "--config", str(_write(tmp_path, "command = \n"))]) == 1


def test_bad_jobs(tmp_path):
    assert main(["run", "--config", str(CONFIGS / "control.toml"), "--jobs", "0"]) == 1


def test_control_run_is_zero(tmp_path):
    out = tmp_path / "ctl"
    assert main(["run", "--config", str(CONFIGS / "control.toml"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    row = report["rows"][0]
    assert row["D_matched"] == 0 and row["W1"] == 0
    echo = json.loads((out / "config.json").read_text())
    assert echo == canonical(loads_toml((CONFIGS / "control.toml").read_text()))
    assert (out / "diagnostics.csv").exists()


def test_solve_run_outputs(tmp_path):
    cfg = _write(tmp_path, """command = "solve"
[scenario]
dim = 2
n = 32
kappa = 1e-3
t_final = 0.1
[scenario.velocity]
kind = "shear"
""")
    out = tmp_path / "s"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--plot", "svg"]) == 0
    rep = json.loads((out / "report.json").read_text())
    theta = load_field(out / "theta_T.bin")
    assert theta.grid.n == 32
    assert theta.mass() == pytest.approx(rep["final"]["mass"], rel=1e-12)
    assert (out / "diagnostics.svg").read_text().lstrip().startswith("<?xml")
    lines = (out / "diagnostics.csv").read_text().splitlines()
    assert lines[0].startswith("t,")


def test_distance_run_outputs(tmp_path):
    out = tmp_path / "d"
    assert main(["run", "--config", str(CONFIGS / "distance.toml"), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["value"] > 0
    assert (out / "plan.csv").exists() and (out / "potential.csv").exists()


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, 'command = "solve"\n[scenario]\ndim = 1\nn = 64\nkappa = 1.0\ndt = 0.01\n')
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "StabilityError" in capsys.readouterr().err


def test_diffusivity_config_slope(tmp_path):
    out = tmp_path / "diff"
    assert main(["run", "--config", str(CONFIGS / "diffusivity.toml"), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert 0.95 <= rep["slope"] <= 1.05


@pytest.mark.parametrize("suite", ["duality", "conservation", "oracles", "rates"])
def test_check_suites(suite, capsys):
    assert main(["check", suite]) == 0
    assert "checks passed" in capsys.readouterr().out


def test_check_unknown_suite(capsys):
    assert main(["check", "nonsense"]) == 1
    assert "unknown suite" in capsys.readouterr().err


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "x.json"
    atomic_write(target, lambda p: p.write_text("{}"))
    assert target.read_text() == "{}"

    def boom(p):
        p.write_text("partial")
        raise RuntimeError("interrupted")

    with pytest.raises(RuntimeError):
        atomic_write(target, boom)
    assert target.read_text() == "{}"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["x.json"]


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "krlab" in capsys.readouterr().out
