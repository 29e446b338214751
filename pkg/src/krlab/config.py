"""Run configuration: TOML parsing, schema validation and canonical form."""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib
import tomli_w

from .errors import ConfigError, KrlabError
from .experiments import DataSpec, Scenario, SweepSpec
from .velocity import FieldFamilySpec

__all__ = ["RunConfig", "parse_config", "load_config", "loads_toml", "canonical", "dumps_toml", "COMMANDS", "SUITES"]

COMMANDS = ("solve", "distance", "experiment", "check")
SUITES = ("conservation", "duality", "oracles", "rates", "all")

_NUM = (int, float)


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _pow2(x):
    return x >= 2 and x & (x - 1) == 0


# key -> (accepted types, predicate or None, human description)
_DATA = {
    "kind": (str, None, "profile kind"),
    "sigma": (_NUM, _pos, "> 0"),
    "radius": (_NUM, _pos, "> 0"),
    "center": (list, None, "list of coordinates"),
    "mass": (_NUM, _pos, "> 0"),
    "fraction": (_NUM, lambda x: 0 < x <= 1, "in (0, 1]"),
}
_VELOCITY = {
    "kind": (str, None, "field kind"),
    "amplitude": (_NUM, None, "a number"),
    "n": (int, _pos, "a positive integer"),
    "center": (list, None, "list of coordinates"),
    "radius": (_NUM, _pos, "> 0"),
    "outer_radius": (_NUM, _pos, "> 0"),
    "circulation": (_NUM, None, "a number"),
    "direction": (list, None, "list of components"),
}
_SCENARIO = {
    "dim": (int, lambda x: x in (1, 2), "1 or 2"),
    "n": (int, _pow2, "a power of two >= 2"),
    "L": (_NUM, _pos, "> 0"),
    "kappa": (_NUM, _nonneg, ">= 0"),
    "t_final": (_NUM, _pos, "> 0"),
    "scheme": (str, lambda x: x in ("explicit", "imex"), "'explicit' or 'imex'"),
    "dt": ((str, int, float), lambda x: x == "auto" or (not isinstance(x, str) and x > 0), "'auto' or > 0"),
    "cfl": (_NUM, lambda x: 0 < x <= 1, "in (0, 1]"),
    "initial": (dict, None, "a table"),
    "velocity": (dict, None, "a table"),
}
_SWEEP = {
    "channel": (str, None, "sweep channel"),
    "params": (list, None, "a list of numbers"),
    "cost": (str, lambda x: x in ("W1", "LogDelta", "Tanh"), "W1, LogDelta or Tanh"),
    "delta_policy": (str, lambda x: x in ("matched", "fixed"), "'matched' or 'fixed'"),
    "delta": (_NUM, _pos, "> 0"),
    "method": (str, lambda x: x in ("exact", "sinkhorn"), "'exact' or 'sinkhorn'"),
    "seed": (int, _nonneg, ">= 0"),
    "p": (_NUM, lambda x: x >= 1, ">= 1"),
    "q": (_NUM, lambda x: x >= 1, ">= 1"),
    "wavelength_factor": (_NUM, lambda x: x > 0, "> 0"),
    "kappa_policy": (str, None, "kappa policy"),
    "kappa_ratio": (_NUM, lambda x: x > 1, "> 1"),
    "kappa_sum": (_NUM, _pos, "> 0"),
    "kappa_base": (_NUM, _nonneg, ">= 0"),
    "perturbation": (str, lambda x: x in ("mollify", "block"), "'mollify' or 'block'"),
    "vorticity": (dict, None, "a table"),
    "p_values": (list, None, "a list of numbers"),
    "ball_radius": (_NUM, _pos, "> 0"),
    "cap": (int, _pos, "a positive integer"),
    "on_overflow": (str, lambda x: x in ("error", "coarsen", "sinkhorn"), "error, coarsen or sinkhorn"),
    "reg": (_NUM, _pos, "> 0"),
    "bounded_factor": (_NUM, lambda x: x >= 1, ">= 1"),
    "stability_factor": (_NUM, lambda x: x >= 1, ">= 1"),
    "min_decades": (_NUM, _nonneg, ">= 0"),
}
_DISTANCE = {
    "first": (dict, None, "a table"),
    "second": (dict, None, "a table"),
    "cost": (str, lambda x: x in ("W1", "LogDelta", "Tanh"), "W1, LogDelta or Tanh"),
    "delta": (_NUM, _pos, "> 0"),
    "method": (str, lambda x: x in ("exact", "sinkhorn"), "'exact' or 'sinkhorn'"),
    "reg": (_NUM, _pos, "> 0"),
    "cap": (int, _pos, "a positive integer"),
    "on_overflow": (str, lambda x: x in ("error", "coarsen", "sinkhorn"), "error, coarsen or sinkhorn"),
}
_CHECK = {"suite": (str, lambda x: x in SUITES, f"one of {SUITES}")}
_TOP = {
    "command": (str, lambda x: x in COMMANDS, f"one of {COMMANDS}"),
    "out": (str, None, "a path"),
    "verbosity": (int, _nonneg, ">= 0"),
    "scenario": (dict, None, "a table"),
    "sweep": (dict, None, "a table"),
    "distance": (dict, None, "a table"),
    "check": (dict, None, "a table"),
}
_NESTED = {
    "scenario": _SCENARIO,
    "scenario.initial": _DATA,
    "scenario.velocity": _VELOCITY,
    "sweep": _SWEEP,
    "sweep.vorticity": _DATA,
    "distance": _DISTANCE,
    "distance.first": _DATA,
    "distance.second": _DATA,
    "check": _CHECK,
}


def _validate(table: dict, schema: dict, prefix: str):
    for key, value in table.items():
        name = f"{prefix}.{key}" if prefix else key
        if key not in schema:
            raise ConfigError(f"unknown key '{name}'")
        types, pred, desc = schema[key]
        if isinstance(value, bool) or not isinstance(value, types):
            raise ConfigError(f"'{name}' must be {desc}, got {value!r}")
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"'{name}' must be finite")
        if pred is not None and not pred(value):
            raise ConfigError(f"'{name}' must be {desc}, got {value!r}")
        sub = _NESTED.get(name)
        if sub is not None:
            _validate(value, sub, name)
        elif isinstance(value, list) and key in ("params", "p_values", "center", "direction"):
            if not all(isinstance(v, _NUM) and not isinstance(v, bool) for v in value):
                raise ConfigError(f"'{name}' must contain only numbers")


def canonical(raw: dict) -> dict:
    """Normalise a parsed config: keys sorted at every level."""
    def norm(v):
        if isinstance(v, dict):
            return {k: norm(v[k]) for k in sorted(v)}
        if isinstance(v, list):
            return [norm(x) for x in v]
        return v

    return norm(raw)


def dumps_toml(cfg: dict) -> str:
    return tomli_w.dumps(canonical(cfg))


@dataclass
class RunConfig:
    """Validated configuration of one run."""

    command: str
    raw: dict
    out: Optional[str] = None
    verbosity: int = 1
    scenario: Optional[Scenario] = None
    sweep: Optional[SweepSpec] = None
    distance: dict = field(default_factory=dict)
    suite: str = "all"

    def canonical(self) -> dict:
        return canonical(self.raw)

    def echo_json(self) -> str:
        return json.dumps(self.canonical(), indent=2, sort_keys=True) + "\n"


def _data(d: Optional[dict], default: DataSpec) -> DataSpec:
    if d is None:
        return default
    d = dict(d)
    if "center" in d:
        d["center"] = tuple(d["center"])
    return DataSpec(**d)


def _scenario(d: dict) -> Scenario:
    d = dict(d)
    initial = _data(d.pop("initial", None), DataSpec())
    vel = d.pop("velocity", None)
    velocity = None
    if vel is not None:
        vel = dict(vel)
        for key in ("center", "direction"):
            if key in vel:
                vel[key] = tuple(vel[key])
        velocity = FieldFamilySpec(**vel)
    if d.get("dt") == "auto":
        d["dt"] = None
    return Scenario(initial=initial, velocity=velocity, **d)


def parse_config(raw: dict, seed: Optional[int] = None) -> RunConfig:
    """Validate ``raw`` against the schema and build the domain objects.

    Raises
    ------
    ConfigError
        Naming the offending key.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table")
    _validate(raw, _TOP, "")
    if "command" not in raw:
        raise ConfigError("missing key 'command'")
    cmd = raw["command"]
    cfg = RunConfig(command=cmd, raw=raw, out=raw.get("out"), verbosity=raw.get("verbosity", 1))
    try:
        if cmd in ("solve", "distance", "experiment"):
            cfg.scenario = _scenario(raw.get("scenario", {}))
        if cmd == "experiment":
            if "sweep" not in raw:
                raise ConfigError("experiment needs a [sweep] table")
            sw = dict(raw["sweep"])
            for key in ("channel", "params"):
                if key not in sw:
                    raise ConfigError(f"missing key 'sweep.{key}'")
            sw["params"] = tuple(sw["params"])
            if "p_values" in sw:
                sw["p_values"] = tuple(sw["p_values"])
            if "vorticity" in sw:
                sw["vorticity"] = _data(sw["vorticity"], None)
            if seed is not None:
                sw["seed"] = seed
            cfg.sweep = SweepSpec(scenario=cfg.scenario, **sw)
        if cmd == "distance":
            dist = dict(raw.get("distance", {}))
            for key in ("first", "second"):
                if key not in dist:
                    raise ConfigError(f"missing key 'distance.{key}'")
                dist[key] = _data(dist[key], None)
            cfg.distance = dist
        if cmd == "check":
            cfg.suite = raw.get("check", {}).get("suite", "all")
    except ConfigError:
        raise
    except KrlabError as exc:
        raise ConfigError(str(exc)) from exc
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path, seed: Optional[int] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(raw, seed=seed)


def loads_toml(text: str) -> dict:
    return tomllib.loads(text)
