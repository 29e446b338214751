"""Command-line front end.

``krlab run --config PATH`` validates a TOML config, dispatches it and
writes the results; ``krlab check SUITE`` runs an invariant suite.

Exit codes: 0 success, 1 invalid input, 2 numerical failure or failed check.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .checks import SUITES, run_suite
from .config import RunConfig, load_config
from .errors import ConfigError, KrlabError, NumericalError
from .experiments import _jsonable, build_data, run_sweep
from .grid import save_field
from .solver import solve
from .transport import CostFunction, distance

__all__ = ["main", "run", "check", "atomic_write"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


def atomic_write(path, writer: Callable[[Path], object]) -> Path:
    """Call ``writer`` on a temporary file next to ``path``, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(Path(tmp))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def _write_json(path, obj) -> Path:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    return atomic_write(path, lambda p: p.write_text(text))


def _plot_series(path, t, series: dict, title: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(series), figsize=(4 * len(series), 3.5))
    for ax, (name, vals) in zip(np.atleast_1d(axes), series.items()):
        ax.plot(t, vals)
        ax.set_xlabel("t")
        ax.set_title(name)
    fig.suptitle(title)
    fig.tight_layout()
    atomic_write(path, lambda p: fig.savefig(p, format="svg", metadata={"Date": None}))
    plt.close(fig)


# --------------------------------------------------------------------------
# commands


def _run_solve(cfg: RunConfig, out: Path, plot: str) -> dict:
    sc = cfg.scenario
    grid = sc.grid()
    theta0 = build_data(sc.initial, grid)
    theta, diag = solve(theta0, sc.velocity_field(grid), sc.config())
    atomic_write(out / "diagnostics.csv", diag.to_csv)
    atomic_write(out / "theta_T.bin", lambda p: save_field(theta, p))
    if plot == "svg":
        _plot_series(out / "diagnostics.svg", diag.t, {"mass": diag.mass, "L2": diag.lq, "entropy": diag.entropy},
                     "solve")
    last = {c: float(diag.column(c)[-1]) for c in ("t", "mass", "l1", "lq", "linf", "entropy")}
    return {
        "command": "solve",
        "final": last,
        "steps": diag.steps,
        "provenance": {"scenario": _jsonable(asdict(sc)), "dt": diag.dt, "scheme": sc.scheme,
                       "q": diag.q, "grid": {"dim": grid.dim, "n": grid.n, "L": grid.L}},
    }


def _run_distance(cfg: RunConfig, out: Path, plot: str) -> dict:
    sc, d = cfg.scenario, cfg.distance
    grid = sc.grid()
    a, b = build_data(d["first"], grid), build_data(d["second"], grid)
    kind = d.get("cost", "W1")
    cost = CostFunction.log_delta(d.get("delta", 1e-2)) if kind == "LogDelta" else CostFunction(kind)
    method = d.get("method", "exact")
    kw = {k: d[k] for k in ("reg", "cap", "on_overflow") if k in d}
    if method == "exact":
        value, (_, plan, pot) = distance(a, b, cost, method=method, return_solution=True, **kw)
        if plan is not None:
            atomic_write(out / "plan.csv", plan.to_csv)
            atomic_write(out / "potential.csv", pot.to_csv)
    else:
        value = distance(a, b, cost, method=method, **kw)
    return {"command": "distance", "value": float(value), "provenance": value.provenance}


def _run_experiment(cfg: RunConfig, out: Path, plot: str, jobs: int) -> dict:
    rep = run_sweep(cfg.sweep, jobs=jobs)
    atomic_write(out / "diagnostics.csv", rep.to_csv)
    if plot == "svg" and sum(1 for r in rep.rows if r["param"] > 0) >= 2:
        atomic_write(out / f"{rep.channel}.svg", rep.to_svg)
    return {"command": "experiment", **rep.as_dict()}


def run(config_path, out: Optional[str] = None, jobs: int = 1, seed: Optional[int] = None,
        plot: str = "none") -> int:
    """Validate and execute one config; returns the exit code."""
    try:
        cfg = load_config(config_path, seed=seed)
    except ConfigError as exc:
        print(f"krlab: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    outdir = Path(out or cfg.out or "krlab-out")
    outdir.mkdir(parents=True, exist_ok=True)
    atomic_write(outdir / "config.json", lambda p: p.write_text(cfg.echo_json()))
    try:
        if cfg.command == "solve":
            report = _run_solve(cfg, outdir, plot)
        elif cfg.command == "distance":
            report = _run_distance(cfg, outdir, plot)
        elif cfg.command == "experiment":
            report = _run_experiment(cfg, outdir, plot, jobs)
        else:
            return check(cfg.suite)
    except NumericalError as exc:
        print(f"krlab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KrlabError as exc:
        print(f"krlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report["version"] = __version__
    _write_json(outdir / "report.json", report)
    if cfg.verbosity:
        print(f"wrote {outdir / 'report.json'}")
    return EXIT_OK


def check(suite: str) -> int:
    if suite != "all" and suite not in SUITES:
        print(f"krlab: unknown suite {suite!r}; expected one of {sorted(SUITES) + ['all']}", file=sys.stderr)
        return EXIT_INVALID
    try:
        results = run_suite(suite)
    except NumericalError as exc:
        print(f"krlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(r.line(), file=sys.stderr)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_NUMERICAL if failed else EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="krlab", description="Advection-diffusion stability experiments.")
    p.add_argument("--version", action="version", version=f"krlab {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="execute a TOML config")
    r.add_argument("--config", required=True, metavar="PATH")
    r.add_argument("--out", metavar="DIR")
    r.add_argument("--jobs", type=int, default=1, metavar="N")
    r.add_argument("--seed", type=int, metavar="N")
    r.add_argument("--plot", choices=("none", "svg"), default="none")
    c = sub.add_parser("check", help="run an invariant suite")
    c.add_argument("suite")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.cmd == "check":
        return check(args.suite)
    if args.jobs < 1:
        print("krlab: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    return run(args.config, out=args.out, jobs=args.jobs, seed=args.seed, plot=args.plot)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
