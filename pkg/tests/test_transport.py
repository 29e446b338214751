import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm

from krlab.checks import random_pair
from krlab.errors import (
    ConvergenceError,
    DimensionError,
    InvalidParameterError,
    MassMismatchError,
    SizeError,
)
from krlab.grid import Grid, ScalarField, VectorField, gaussian_density
from krlab.solver import SolverConfig, solve
from krlab.transport import (
    CostFunction,
    SignedMeasurePair,
    bound_otd_check,
    certificates,
    cost_matrix,
    distance,
    dtD_check,
    exact_ot,
    kr_rate,
    pairwise_distance,
    signed_split,
    sinkhorn_ot,
    vertex_enumeration,
    w1_1d_oracle,
)

COSTS = [CostFunction.w1(), CostFunction.log_delta(0.05), CostFunction.tanh()]


def _zero_mean(rng, g):
    v = rng.normal(size=g.shape)
    return ScalarField(g, v - v.mean())


# costs


@pytest.mark.parametrize("cost", COSTS + [CostFunction.log_delta(1e-3)])
def test_cost_shape(cost):
    z = np.linspace(0, 5, 501)
    c = cost(z)
    assert c[0] == 0 and np.all(np.diff(c) >= 0)
    if cost.kind != "W1":
        assert np.all(np.diff(c, 2) <= 1e-15)
    slope = np.max(np.diff(c) / np.diff(z))
    assert slope <= cost.lipschitz_constant * (1 + 1e-12)


def test_cost_validation():
    with pytest.raises(InvalidParameterError):
        CostFunction("L2")
    with pytest.raises(InvalidParameterError):
        CostFunction.log_delta(0.0)
    assert CostFunction.log_delta(0.1).lipschitz_constant == pytest.approx(10.0)


def test_periodic_distance():
    x = np.array([[0.45], [0.0]])
    y = np.array([[-0.45]])
    d = pairwise_distance(x, y, period=1.0)
    assert d[0, 0] == pytest.approx(0.1) and d[1, 0] == pytest.approx(0.45)
    assert pairwise_distance(x, y)[0, 0] == pytest.approx(0.9)
    assert cost_matrix(x, y, CostFunction.w1(), period=1.0).shape == (2, 1)


# signed split


def test_split_zero():
    pair = signed_split(ScalarField.zeros(Grid(2, 8)))
    assert pair.is_empty


def test_split_dipole():
    g = Grid(2, 8)
    v = np.zeros(g.shape)
    v[1, 2], v[5, 5] = 1.0, -1.0
    pair = signed_split(ScalarField(g, v))
    assert pair.pos_weights.tolist() == [g.cell_volume] and pair.neg_weights.tolist() == [g.cell_volume]
    assert np.allclose(pair.pos_points[0], g.points()[1 * 8 + 2])


def test_split_nonzero_mass():
    with pytest.raises(MassMismatchError):
        signed_split(ScalarField.constant(Grid(1, 8), 1.0))


@given(st.integers(0, 2**31 - 1))
def test_split_balanced(seed):
    pair = signed_split(_zero_mean(np.random.default_rng(seed), Grid(2, 16)))
    assert abs(pair.pos_weights.sum() - pair.neg_weights.sum()) <= 1e-10 * pair.mass


def test_split_threshold_recorded():
    g = Grid(1, 8)
    f = ScalarField(g, [1.0, -1.0, 1e-3, -2e-3, 0, 0, 0, 1e-3])
    pair = signed_split(f, threshold=2e-3 * g.h)
    assert pair.size == 2 and pair.meta["dropped_mass"] == pytest.approx(4e-3 * g.h)


def test_pair_validation():
    with pytest.raises(MassMismatchError):
        SignedMeasurePair([[0.0]], [1.0], [[1.0]], [2.0])
    with pytest.raises(InvalidParameterError):
        SignedMeasurePair([[0.0]], [-1.0], [[1.0]], [-1.0])


# exact solver


@pytest.mark.parametrize("a", [0.05, 0.3, 1.7])
def test_single_pair_values(a):
    pair = SignedMeasurePair([[0.0, 0.0]], [1.0], [[a, 0.0]], [1.0])
    assert exact_ot(pair, CostFunction.w1())[0] == pytest.approx(a, rel=1e-14)
    assert exact_ot(pair, CostFunction.log_delta(0.01))[0] == pytest.approx(np.log(a / 0.01 + 1), rel=1e-14)


@given(st.integers(0, 2**31 - 1))
def test_three_by_three_vertex_enumeration(seed):
    pair = random_pair(np.random.default_rng(seed), 3, 3)
    for cost in COSTS:
        value = exact_ot(pair, cost)[0]
        brute = vertex_enumeration(pair.pos_weights, pair.neg_weights, cost(pair.distances()))
        assert abs(value - brute) <= 1e-10


@given(st.integers(0, 2**31 - 1), st.integers(1, 40), st.integers(1, 40))
def test_certificates(seed, m, k):
    pair = random_pair(np.random.default_rng(seed), m, k)
    for cost in COSTS:
        value, plan, pot = exact_ot(pair, cost)
        cert = certificates(pair, cost, value, plan, pot)
        assert abs(cert["gap"]) <= 1e-8 * (1 + value)
        assert cert["feasibility"] <= 1e-9
        assert cert["slackness"] <= 1e-7
        assert cert["marginal_error"] <= 1e-9


def test_size_cap():
    pair = random_pair(np.random.default_rng(0), 30, 30)
    with pytest.raises(SizeError, match="sinkhorn"):
        exact_ot(pair, CostFunction.w1(), cap=50)


def test_vertex_enumeration_limits():
    with pytest.raises(SizeError):
        vertex_enumeration(np.ones(5), np.ones(5), np.ones((5, 5)))


def test_plan_and_potential_csv(tmp_path):
    pair = random_pair(np.random.default_rng(1), 4, 5)
    _, plan, pot = exact_ot(pair, CostFunction.w1())
    rows = plan.to_csv(tmp_path / "plan.csv").read_text().splitlines()
    assert rows[0] == "i,j,mass" and len(rows) == len(plan) + 1
    assert np.allclose(plan.row_sums(), pair.pos_weights) and np.allclose(plan.col_sums(), pair.neg_weights)
    prow = pot.to_csv(tmp_path / "pot.csv").read_text().splitlines()
    assert prow[0] == "index,zeta" and len(prow) == 10


# Sinkhorn


def test_sinkhorn_close_to_exact():
    rng = np.random.default_rng(5)
    for m, k, reg in ((10, 12, 1e-2), (40, 40, 1e-2), (120, 150, 5e-2)):
        pair = random_pair(rng, m, k)
        for cost in COSTS:
            exact = exact_ot(pair, cost)[0]
            approx, info = sinkhorn_ot(pair, cost, reg=reg)
            # entropic bias per unit mass
            assert abs(approx - exact) <= 3 * reg * np.log(m + k) * pair.mass
            assert info.marginal_error <= 1e-9


def test_sinkhorn_symmetric():
    pair = random_pair(np.random.default_rng(6), 20, 15)
    for cost in COSTS:
        assert sinkhorn_ot(pair, cost)[0] == pytest.approx(sinkhorn_ot(pair.swapped(), cost)[0], abs=1e-9)


def test_sinkhorn_monotone_in_reg():
    pair = random_pair(np.random.default_rng(7), 20, 20)
    vals = [sinkhorn_ot(pair, CostFunction.w1(), reg=r)[0] for r in (1e-1, 1e-2, 1e-3)]
    assert vals[1] <= vals[0] + 1e-9 and vals[2] <= vals[1] + 1e-9


def test_sinkhorn_nonconvergence():
    pair = random_pair(np.random.default_rng(8), 30, 30)
    with pytest.raises(ConvergenceError) as info:
        sinkhorn_ot(pair, CostFunction.w1(), reg=1e-4, max_iter=10)
    assert info.value.residual > 1e-9


def test_sinkhorn_rejects_bad_reg():
    with pytest.raises(InvalidParameterError):
        sinkhorn_ot(random_pair(np.random.default_rng(0), 2, 2), CostFunction.w1(), reg=0)


# 1D oracle


def test_oracle_identity_and_translation():
    g = Grid(1, 512, 4.0)
    mu = gaussian_density(g, 0.05)
    assert w1_1d_oracle(mu, mu) == 0
    shifted = mu.shift(40)
    assert w1_1d_oracle(mu, shifted) == pytest.approx(40 * g.h, rel=1e-10)


def test_oracle_gaussians():
    # int |Phi(x/s1) - Phi(x/s2)| dx = (s1 - s2) sqrt(2/pi)
    g = Grid(1, 2048, 8.0)
    s1, s2 = 0.3, 0.1
    val = w1_1d_oracle(gaussian_density(g, s1), gaussian_density(g, s2))
    assert val == pytest.approx((s1 - s2) * np.sqrt(2 / np.pi), rel=0.01)
    x = np.linspace(-4, 4, 200001)
    quad = np.trapezoid(np.abs(norm.cdf(x / s1) - norm.cdf(x / s2)), x)
    assert val == pytest.approx(quad, rel=0.01)


def test_oracle_errors():
    with pytest.raises(DimensionError):
        w1_1d_oracle(ScalarField.zeros(Grid(2, 4)), ScalarField.zeros(Grid(2, 4)))
    g = Grid(1, 8)
    with pytest.raises(MassMismatchError):
        w1_1d_oracle(ScalarField.constant(g, 1.0), ScalarField.constant(g, 2.0))


@given(st.integers(0, 2**31 - 1))
def test_exact_w1_matches_oracle_1d(seed):
    rng = np.random.default_rng(seed)
    g = Grid(1, 64, 4.0)
    a = np.zeros(64)
    b = np.zeros(64)
    a[16:48] = rng.random(32)
    b[16:48] = rng.random(32)
    b *= a.sum() / b.sum()
    mu, nu = ScalarField(g, a), ScalarField(g, b)
    assert float(distance(mu, nu, CostFunction.w1())) == pytest.approx(w1_1d_oracle(mu, nu), abs=1e-8)


# distance


@given(st.integers(0, 2**31 - 1), st.sampled_from(COSTS))
def test_distance_identity(seed, cost):
    f = gaussian_density(Grid(2, 16), 0.1) + ScalarField(Grid(2, 16), np.random.default_rng(seed).random((16, 16)))
    assert float(distance(f, f, cost)) == 0


def test_distance_provenance():
    g = Grid(1, 32)
    d = distance(gaussian_density(g, 0.1), gaussian_density(g, 0.2), CostFunction.log_delta(0.01))
    for key in ("method", "cost", "support_points", "split", "balance_rtol", "coarsen_factor"):
        assert key in d.provenance
    assert d.provenance["cost"]["delta"] == 0.01


def test_distance_mass_mismatch():
    g = Grid(1, 16)
    with pytest.raises(MassMismatchError):
        distance(gaussian_density(g, 0.1), gaussian_density(g, 0.1, mass=2), CostFunction.w1())


@given(st.integers(0, 2**31 - 1))
def test_log_distance_monotone_and_below_w1(seed):
    rng = np.random.default_rng(seed)
    g = Grid(2, 8)
    a, b = rng.random(g.shape), rng.random(g.shape)
    b *= a.sum() / b.sum()
    mu, nu = ScalarField(g, a), ScalarField(g, b)
    w1 = float(distance(mu, nu, CostFunction.w1()))
    vals = [float(distance(mu, nu, CostFunction.log_delta(d))) for d in (1e-3, 1e-2, 1e-1)]
    assert vals[1] <= vals[0] * (1 + 1e-12) and vals[2] <= vals[1] * (1 + 1e-12)
    for d, v in zip((1e-3, 1e-2, 1e-1), vals):
        assert v <= w1 / d * (1 + 1e-12)


@given(st.integers(0, 2**31 - 1), st.sampled_from(COSTS))
def test_triangle_inequality(seed, cost):
    rng = np.random.default_rng(seed)
    g = Grid(2, 8)
    fields = []
    for _ in range(3):
        v = rng.random(g.shape)
        fields.append(ScalarField(g, v / v.sum() / g.cell_volume))
    d12 = float(distance(fields[0], fields[1], cost))
    d23 = float(distance(fields[1], fields[2], cost))
    d13 = float(distance(fields[0], fields[2], cost))
    assert d13 <= d12 + d23 + 1e-9


def test_overflow_policies():
    g = Grid(2, 32)
    rng = np.random.default_rng(9)
    f = _zero_mean(rng, g)
    zero = ScalarField.zeros(g)
    with pytest.raises(SizeError):
        distance(f, zero, CostFunction.w1(), cap=256)
    coarse = distance(f, zero, CostFunction.w1(), cap=256, on_overflow="coarsen")
    factor = coarse.provenance["coarsen_factor"]
    assert factor == 2 and coarse.provenance["support_points"] <= 256
    fine = distance(f, zero, CostFunction.w1())
    # block aggregation moves each unit of mass by at most half a coarse cell diagonal
    l1 = np.abs(f.values).sum() * g.cell_volume
    assert abs(float(coarse) - float(fine)) <= factor * g.h / np.sqrt(2) * l1
    sk = distance(f, zero, CostFunction.w1(), cap=256, on_overflow="sinkhorn", reg=1e-2)
    assert sk.provenance["method"] == "sinkhorn"
    assert abs(float(sk) - float(fine)) <= 3 * 1e-2 * np.log(g.size) * l1


def test_potential_gradient_bound():
    g = Grid(2, 32)
    a = gaussian_density(g, 0.1, center=(-0.1, 0.05))
    b = gaussian_density(g, 0.15, center=(0.1, 0.0))
    for cost in (CostFunction.w1(), CostFunction.log_delta(0.05)):
        _, (_, _, pot) = distance(a, b, cost, return_solution=True)
        zeta = pot.on_grid(g)
        for k in range(2):
            fwd = np.abs(np.roll(zeta, -1, axis=k) - zeta) / g.h
            assert fwd.max() <= cost.lipschitz_constant + 1e-9


# interpolation bound


def test_bound_otd_zero():
    rep = bound_otd_check(ScalarField.zeros(Grid(2, 8)), 0.5, 0.1)
    assert rep["lhs"] == 0 and rep["rhs"] == 0 and rep["passed"]


def test_bound_otd_dipole():
    g = Grid(2, 16)
    v = np.zeros(g.shape)
    v[4, 4], v[10, 9] = 1.0, -1.0
    delta = 1e-2
    rep = bound_otd_check(ScalarField(g, v), np.sqrt(delta), delta)
    assert rep["passed"] and rep["slack"] > 0


def test_bound_otd_validation():
    with pytest.raises(InvalidParameterError):
        bound_otd_check(ScalarField.zeros(Grid(1, 8)), 1.0, 0.1)


@given(st.integers(0, 2**31 - 1), st.sampled_from([0.5, 0.1, 0.01]), st.sampled_from([0.5, 0.1, 0.01]))
def test_bound_otd_random(seed, gamma, delta):
    rep = bound_otd_check(_zero_mean(np.random.default_rng(seed), Grid(2, 8)), gamma, delta)
    assert rep["passed"] and rep["slack"] >= 0


# derivative identity


def test_kr_rate_trivial():
    g = Grid(2, 16)
    f = gaussian_density(g, 0.1)
    u = VectorField.constant(g, (0.3, 0.1))
    zeta = np.random.default_rng(0).random(g.shape)
    for mode in ("centered", "face"):
        assert abs(kr_rate(f, f, u, u, 0.1, 0.1, zeta, mode)) <= 1e-12
    with pytest.raises(InvalidParameterError):
        kr_rate(f, f, u, u, 0.1, 0.1, zeta, "spectral")


def _translation_triples(c=0.5, t=0.1, dt_fd=0.01):
    g = Grid(1, 1024, 2.0)
    kappa = 1e-4
    th1_0 = gaussian_density(g, 0.03, center=(-0.2,))
    th2_0 = gaussian_density(g, 0.03, center=(0.2,))
    u1, u2 = VectorField.constant(g, c), VectorField.zeros(g)
    triples = []
    for th0, u in ((th1_0, u1), (th2_0, u2)):
        trip = [solve(th0, u, SolverConfig(kappa=kappa, t_final=s), record=False)[0] for s in (t - dt_fd, t, t + dt_fd)]
        triples.append(trip)
    return triples, u1, u2, kappa


def test_dtD_translation_rate():
    (tr1, tr2), u1, u2, kappa = _translation_triples()
    rep = dtD_check(tr1, tr2, u1, u2, kappa, kappa, 0.1, 0.01, CostFunction.w1())
    assert rep["finite_difference"] == pytest.approx(-0.5, rel=0.05)
    assert rep["relative_gap"] <= 0.1


def test_dtD_identical_trajectories():
    g = Grid(1, 64)
    f = gaussian_density(g, 0.1)
    u = VectorField.zeros(g)
    rep = dtD_check([f, f, f], [f, f, f], u, u, 0.1, 0.1, 0.5, 0.01, CostFunction.log_delta(0.1))
    assert abs(rep["finite_difference"]) <= 1e-8 and abs(rep["formula"]) <= 1e-8


def test_dtD_validation():
    g = Grid(1, 8)
    f = ScalarField.zeros(g)
    u = VectorField.zeros(g)
    with pytest.raises(InvalidParameterError):
        dtD_check([f, f], [f, f, f], u, u, 0, 0, 1, 0.1, CostFunction.w1())
    with pytest.raises(InvalidParameterError):
        dtD_check([f] * 3, [f] * 3, u, u, 0, 0, 1, 0.0, CostFunction.w1())


def test_symmetric_potential_matches_alternating():
    from krlab.transport.costs import pairwise_distance
    from krlab.transport.sinkhorn import sinkhorn_log, symmetric_potential

    rng = np.random.default_rng(10)
    x = rng.uniform(-0.5, 0.5, size=(25, 2))
    w = rng.uniform(0.1, 1.0, 25)
    w /= w.sum()
    for cost in COSTS:
        C = cost.evaluate(pairwise_distance(x, x, None))
        f, g, _, _, _ = sinkhorn_log(w, w, C, 5e-2, tol=1e-12)
        fs = symmetric_potential(w, C, 5e-2, tol=1e-13)
        assert 2 * w @ fs == pytest.approx(w @ f + w @ g, abs=1e-9)
