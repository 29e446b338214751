"""Headless invariant suites behind ``krlab check``.

Every check yields a :class:`CheckResult` holding both sides of the
comparison, so a failure can be printed without rerunning anything.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import InvalidParameterError
from .experiments import DataSpec, Scenario, SweepSpec, fit_loglog_rate, sweep_diffusivity
from .grid import Grid, ScalarField, gaussian_density, lq_norm
from .solver import SolverConfig, solve
from .transport import (
    CostFunction,
    SignedMeasurePair,
    certificates,
    distance,
    exact_ot,
    vertex_enumeration,
    w1_1d_oracle,
)
from .velocity import FieldFamilySpec, generate_field

__all__ = ["CheckResult", "SUITES", "run_suite", "random_pair"]

COSTS = (CostFunction.w1(), CostFunction.log_delta(0.05), CostFunction.tanh())


@dataclass
class CheckResult:
    name: str
    lhs: float
    rhs: float
    relation: str
    passed: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.lhs:.6g} {self.relation} {self.rhs:.6g}"


def _le(name, lhs, rhs) -> CheckResult:
    return CheckResult(name, float(lhs), float(rhs), "<=", bool(lhs <= rhs))


def random_pair(rng: np.random.Generator, m: int, k: int, dim: int = 2, period=None) -> SignedMeasurePair:
    """Balanced random pair with ``m`` sources and ``k`` sinks in ``[0, 1)^dim``."""
    a = rng.uniform(0.1, 1.0, m)
    b = rng.uniform(0.1, 1.0, k)
    b *= a.sum() / b.sum()
    return SignedMeasurePair(rng.random((m, dim)), a, rng.random((k, dim)), b, period=period)


# --------------------------------------------------------------------------
# suites


def conservation() -> Iterator[CheckResult]:
    grid = Grid(2, 64, 1.0)
    theta0 = gaussian_density(grid, 0.08, center=(0.15, 0.0))
    for kind in ("shear", "rotation"):
        u = generate_field(FieldFamilySpec(kind, amplitude=1.0), grid)
        theta, diag = solve(theta0, u, SolverConfig(kappa=1e-3, t_final=0.5, q=2.0))
        m0 = diag.mass[0]
        drift = np.max(np.abs(diag.mass - m0)) / abs(m0)
        yield _le(f"{kind}: relative mass drift", drift, 1e-12)
        yield _le(f"{kind}: negative part / max", max(0.0, -theta.values.min()) / theta0.values.max(), 1e-14)
        rise = float(np.max(np.diff(diag.lq))) if len(diag.lq) > 1 else 0.0
        yield _le(f"{kind}: largest L2 increase", rise, 1e-10 * diag.lq[0])


def duality(instances: int = 20, seed: int = 7) -> Iterator[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = {c.label: [0.0, 0.0, 0.0] for c in COSTS}
    for _ in range(instances):
        m, k = rng.integers(1, 33, size=2)
        pair = random_pair(rng, int(m), int(k))
        for cost in COSTS:
            value, plan, pot = exact_ot(pair, cost)
            cert = certificates(pair, cost, value, plan, pot)
            w = worst[cost.label]
            w[0] = max(w[0], abs(cert["gap"]) / (1 + abs(value)))
            w[1] = max(w[1], cert["feasibility"])
            w[2] = max(w[2], cert["slackness"])
    for label, (gap, feas, slack) in worst.items():
        yield _le(f"{label}: duality gap / (1 + value)", gap, 1e-8)
        yield _le(f"{label}: dual feasibility violation", feas, 1e-9)
        yield _le(f"{label}: complementary slackness", slack, 1e-7)


def oracles(seed: int = 11) -> Iterator[CheckResult]:
    grid = Grid(1, 256, 4.0)
    for s1, s2, shift in ((0.1, 0.2, 0.0), (0.15, 0.15, 0.3), (0.05, 0.3, -0.2)):
        mu = gaussian_density(grid, s1)
        nu = gaussian_density(grid, s2, center=(shift,))
        exact = float(distance(mu, nu, CostFunction.w1()))
        oracle = w1_1d_oracle(mu, nu)
        yield _le(f"W1 sigma {s1:g}/{s2:g} shift {shift:g}: |exact - cdf oracle|", abs(exact - oracle), 1e-6)
    rng = np.random.default_rng(seed)
    for i in range(10):
        pair = random_pair(rng, 3, 3)
        for cost in COSTS:
            value, _, _ = exact_ot(pair, cost)
            C = cost.evaluate(pair.distances())
            brute = vertex_enumeration(pair.pos_weights, pair.neg_weights, C)
            yield _le(f"3x3 #{i} {cost.label}: |simplex - enumeration|", abs(value - brute), 1e-10)


def rates() -> Iterator[CheckResult]:
    eps = np.logspace(-3, -1, 5)
    slope, _ = fit_loglog_rate(list(zip(eps, 2.5 * eps**1.5)))
    yield _le("synthetic power law: |slope - 1.5|", abs(slope - 1.5), 1e-10)
    sc = Scenario(dim=1, n=512, L=24.0, initial=DataSpec("gaussian", sigma=0.1), t_final=1.0)
    spec = SweepSpec("diffusivity", (0.5, 0.2, 0.1, 0.05, 0.02, 0.005), scenario=sc, cost="W1",
                     kappa_policy="fixed_sum", kappa_sum=1.25)
    rep = sweep_diffusivity(spec)
    yield _le("diffusivity sweep: |W1 slope - 1|", abs(rep.slope - 1.0), 0.05)


SUITES: dict[str, Callable[[], Iterator[CheckResult]]] = {
    "conservation": conservation,
    "duality": duality,
    "oracles": oracles,
    "rates": rates,
}


def run_suite(name: str, emit: Callable[[str], None] = print) -> list:
    """Run one suite (or ``all``), emitting a line per check."""
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise InvalidParameterError(f"unknown suite {name!r}; expected one of {sorted(SUITES) + ['all']}")
    results = []
    for n in names:
        for res in SUITES[n]():
            res.name = f"[{n}] {res.name}"
            emit(res.line())
            results.append(res)
    return results
