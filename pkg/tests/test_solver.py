import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from krlab.errors import DivergenceError, InvalidParameterError, StabilityError
from krlab.grid import Grid, ScalarField, VectorField, gaussian_density, lq_norm
from krlab.solver import (
    DIAGNOSTIC_COLUMNS,
    SolverConfig,
    VelocitySchedule,
    diagnostics_of,
    flow_log_stability,
    flow_map,
    lipschitz_bound,
    max_outflow_rate,
    solve,
)
from krlab.velocity import FieldFamilySpec, generate_field


def _rel_l2(a, b):
    return lq_norm(a - b, 2) / lq_norm(b, 2)


@pytest.mark.parametrize(
    "kw",
    [dict(kappa=-1, t_final=1), dict(kappa=1, t_final=0), dict(kappa=1, t_final=1, dt=-1),
     dict(kappa=1, t_final=1, scheme="rk4"), dict(kappa=1, t_final=1, cfl_target=1.5),
     dict(kappa=1, t_final=1, q=0.5), dict(kappa=1, t_final=1, diag_every=0)],
)
def test_config_validation(kw):
    with pytest.raises(InvalidParameterError):
        SolverConfig(**kw)


def test_heat_kernel_converges():
    errs = []
    for n in (128, 256, 512):
        g = Grid(1, n, 2.0)
        theta, _ = solve(gaussian_density(g, 0.1), VectorField.zeros(g), SolverConfig(kappa=0.01, t_final=0.5))
        exact = gaussian_density(g, np.sqrt(0.01 + 2 * 0.01 * 0.5))
        errs.append(_rel_l2(theta, exact))
    assert errs[-1] < 1e-3
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_imex_matches_heat_kernel():
    g = Grid(1, 512, 2.0)
    cfg = SolverConfig(kappa=0.01, t_final=0.5, scheme="imex", dt=1e-3)
    theta, _ = solve(gaussian_density(g, 0.1), VectorField.zeros(g), cfg)
    exact = gaussian_density(g, np.sqrt(0.01 + 2 * 0.01 * 0.5))
    assert _rel_l2(theta, exact) < 1e-3


def test_imex_symbol_inverts_backward_euler():
    # one imex step solves (I - dt kappa lap) v1 = v0 exactly
    from krlab.grid import laplacian

    g = Grid(2, 32)
    v0 = ScalarField(g, np.random.default_rng(0).random(g.shape))
    dt, kappa = 0.01, 0.3
    v1, _ = solve(v0, VectorField.zeros(g), SolverConfig(kappa=kappa, t_final=dt, dt=dt, scheme="imex"))
    resid = v1 - laplacian(v1) * (dt * kappa) - v0
    assert np.max(np.abs(resid.values)) <= 1e-12 * np.abs(v0.values).max()


def test_translation_center_of_mass():
    g = Grid(1, 1024, 4.0)
    c, T = 0.7, 1.0
    theta0 = gaussian_density(g, 0.1, center=(-0.5,))
    theta, _ = solve(theta0, VectorField.constant(g, c), SolverConfig(kappa=0.0, t_final=T))
    x = g.axis()
    com = (theta.values * x).sum() / theta.values.sum()
    assert com - (-0.5) == pytest.approx(c * T, rel=1e-3)


def test_piecewise_schedule_returns():
    g = Grid(1, 512, 4.0)
    theta0 = gaussian_density(g, 0.1)
    sched = [(0.0, VectorField.constant(g, 1.0)), (0.5, VectorField.constant(g, -1.0))]
    theta, diag = solve(theta0, sched, SolverConfig(kappa=0.0, t_final=1.0))
    x = g.axis()
    assert abs((theta.values * x).sum() / theta.values.sum()) < 1e-10
    assert np.max(np.abs(diag.mass - diag.mass[0])) <= 1e-12


def test_schedule_validation():
    g = Grid(1, 8)
    with pytest.raises(InvalidParameterError):
        VelocitySchedule([])
    with pytest.raises(InvalidParameterError):
        VelocitySchedule([(0.5, VectorField.zeros(g))])
    with pytest.raises(InvalidParameterError):
        VelocitySchedule([(0.0, VectorField.zeros(g)), (0.5, VectorField.zeros(Grid(1, 16)))])
    s = VelocitySchedule([(0.0, VectorField.constant(g, 1.0)), (1.0, VectorField.constant(g, 3.0))])
    assert s.at(0.99).components[0][0] == 1.0 and s.at(1.0).components[0][0] == 3.0
    assert s.time_norm(2.0, lambda u: u.max_abs()) == pytest.approx(4.0)


def test_fixed_dt_stability_errors():
    g = Grid(1, 64)
    theta0 = gaussian_density(g, 0.1)
    with pytest.raises(StabilityError):
        solve(theta0, VectorField.zeros(g), SolverConfig(kappa=1.0, t_final=1.0, dt=1e-3))
    with pytest.raises(StabilityError):
        solve(theta0, VectorField.constant(g, 100.0), SolverConfig(kappa=1.0, t_final=1.0, dt=1e-2, scheme="imex"))


def test_auto_dt_respects_limits():
    g = Grid(2, 64)
    u = VectorField.constant(g, (1.0, -2.0))
    cfg = SolverConfig(kappa=0.01, t_final=0.1, cfl_target=0.5)
    _, diag = solve(gaussian_density(g, 0.1), u, cfg)
    assert diag.dt <= 0.5 / (max_outflow_rate(u) + 4 * 0.01 / g.h**2) * (1 + 1e-12)
    assert max_outflow_rate(u) == pytest.approx(3.0 / g.h)


def test_overflow_raises_divergence():
    g = Grid(1, 8)
    big = ScalarField(g, np.tile([1.7e308, -1.7e308], 4))
    with pytest.raises(DivergenceError), np.errstate(over="ignore", invalid="ignore"):
        solve(big, VectorField.constant(g, 1.0), SolverConfig(kappa=0.0, t_final=0.01))


def test_grid_mismatch():
    with pytest.raises(InvalidParameterError):
        solve(gaussian_density(Grid(1, 8), 0.1), VectorField.zeros(Grid(1, 16)), SolverConfig(0.0, 1.0))


@given(st.sampled_from(["shear", "rotation", "vortex_patch"]), st.floats(0.0, 0.01), st.integers(0, 2**31 - 1))
def test_conservation_positivity_lq(kind, kappa, seed):
    g = Grid(2, 32)
    theta0 = ScalarField(g, np.random.default_rng(seed).random(g.shape))
    u = generate_field(FieldFamilySpec(kind, amplitude=1.0), g)
    theta, diag = solve(theta0, u, SolverConfig(kappa=kappa, t_final=0.2, q=3.0))
    assert np.max(np.abs(diag.mass - diag.mass[0])) <= 1e-12 * diag.mass[0]
    assert theta.values.min() >= 0
    assert np.all(np.diff(diag.lq) <= 1e-10 * diag.lq[0])
    assert np.all(np.diff(diag.linf) <= 1e-12 * diag.linf[0])


def test_entropy_dissipates():
    g = Grid(2, 64)
    theta0 = gaussian_density(g, 0.08, center=(0.15, 0.0))
    u = generate_field(FieldFamilySpec("shear"), g)
    _, diag = solve(theta0, u, SolverConfig(kappa=5e-3, t_final=0.5))
    assert np.all(np.diff(diag.entropy) <= 1e-8)


def test_first_moment_growth_bound():
    # d/dt int <x> theta <= (|c| + kappa) mass with <x> = sqrt(1 + x^2), |<x>'| <= 1, <x>'' <= 1
    g = Grid(1, 1024, 8.0)
    c, kappa, T = 0.5, 0.05, 1.0
    theta0 = gaussian_density(g, 0.1)
    theta, _ = solve(theta0, VectorField.constant(g, c), SolverConfig(kappa=kappa, t_final=T))
    w = np.sqrt(1 + g.axis() ** 2)
    growth = ((theta.values - theta0.values) * w).sum() * g.h
    assert 0 < growth <= T * (abs(c) + kappa) * theta0.mass()


def test_diagnostics_uniform():
    d = diagnostics_of(ScalarField.constant(Grid(2, 16), 1.0))
    assert d["entropy"] == 0 and d["fisher"] == 0 and d["gradl1"] == 0
    assert d["mass"] == pytest.approx(1.0)


def test_diagnostics_gaussian_fisher():
    g = Grid(1, 2048, 4.0)
    sigma, m = 0.1, 2.0
    d = diagnostics_of(gaussian_density(g, sigma, mass=m))
    assert d["fisher"] == pytest.approx(m / sigma**2, rel=0.02)
    assert d["gradl1"] == pytest.approx(2 * m / (np.sqrt(2 * np.pi) * sigma), rel=0.02)


def test_diagnostics_csv(tmp_path):
    g = Grid(1, 64)
    _, diag = solve(gaussian_density(g, 0.1), VectorField.zeros(g), SolverConfig(kappa=0.01, t_final=0.1, diag_every=5))
    lines = diag.to_csv(tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == ",".join(DIAGNOSTIC_COLUMNS)
    assert len(lines) == len(diag) + 1
    assert diag.t[-1] == pytest.approx(0.1)


# characteristics


def test_flow_map_trivial():
    g = Grid(2, 16, 2.0)
    x0 = np.array([0.3, -0.2])
    assert np.allclose(flow_map(VectorField.zeros(g), x0, 1.0, 0.1), x0)
    out = flow_map(VectorField.constant(g, (0.8, 0.0)), x0, 1.0, 0.1)
    assert np.allclose(out, g.wrap(x0 + [0.8, 0.0]), atol=1e-14)


def test_flow_map_rotation():
    g = Grid(2, 64, 1.0)
    u = generate_field(FieldFamilySpec("rotation", amplitude=2.0, radius=0.3), g)
    x0 = np.array([0.12, 0.05])
    t = 0.7
    ang = 2.0 * t
    rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]]) @ x0
    assert np.allclose(flow_map(u, x0, t, 0.01), rot, atol=1e-6)


def test_flow_log_stability_identical():
    g = Grid(2, 32)
    u = generate_field(FieldFamilySpec("shear"), g)
    rep = flow_log_stability(u, u, [[0.1, 0.1]], 1.0, 0.05)
    assert rep["trivial"] and rep["passed"] and rep["lhs"] == 0


def test_flow_log_stability_shear_plus_constant():
    g = Grid(2, 64)
    u1 = generate_field(FieldFamilySpec("shear"), g)
    lhs = []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        u2 = u1 + VectorField.constant(g, (eps, 0.0))
        rep = flow_log_stability(u1, u2, [[0.1, 0.1], [-0.3, 0.2], [0.0, -0.4]], 1.0, 0.05)
        assert rep["delta"] == pytest.approx(eps)
        assert rep["lhs"] <= np.log(2) + 1e-9
        assert rep["passed"]
        lhs.append(rep["lhs"])
    assert max(lhs) - min(lhs) < 1e-6


def test_lipschitz_bound_linear():
    g = Grid(2, 64, 1.0)
    u = generate_field(FieldFamilySpec("rotation", amplitude=1.0, radius=0.3), g)
    assert lipschitz_bound(u) >= np.sqrt(2) * (1 - 1e-9)
