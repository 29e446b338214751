"""Parameter sweeps for the three perturbation channels of the stability
estimate, the heat-kernel example, the velocity-convergence inequality and the
rough-field uniqueness probe, with log-log rate fits and serialisable reports.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .errors import DomainError, InvalidParameterError
from .grid import (
    Grid,
    ScalarField,
    VectorField,
    block_average,
    gaussian_density,
    indicator_ball,
    lq_norm,
    mollify,
)
from .solver import SolverConfig, solve
from .transport import CostFunction, bound_otd_check, distance, w1_1d_oracle
from .transport.exact import DEFAULT_CAP
from .velocity import FieldFamilySpec, KernelSpec, generate_field, kernel_convolve

__all__ = [
    "DataSpec",
    "Scenario",
    "SweepSpec",
    "ExperimentReport",
    "build_data",
    "fit_loglog_rate",
    "fit_semilog_rate",
    "sweep_velocity",
    "sweep_diffusivity",
    "sweep_initial_data",
    "rough_field_probe",
    "run_sweep",
    "CHANNELS",
]

CHANNELS = ("velocity", "diffusivity", "initial_data", "rough_field")
DATA_KINDS = ("gaussian", "indicator", "cell", "random_indicator", "bump")


# --------------------------------------------------------------------------
# rate fits


def _linfit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise InvalidParameterError("a rate fit needs at least 3 points")
    res = stats.linregress(x, y)
    t = stats.t.ppf(0.975, len(x) - 2)
    half = float(t * res.stderr) if np.isfinite(res.stderr) else 0.0
    slope = float(res.slope)
    return slope, (slope - half, slope + half)


def fit_loglog_rate(series):
    """Least-squares slope of ``log(value)`` against ``log(eps)``.

    Parameters
    ----------
    series : sequence of (eps, value)

    Returns
    -------
    slope : float
    interval : tuple
        95% confidence interval from the slope's standard error.
    """
    eps, val = np.asarray(series, dtype=float).T
    if np.any(eps <= 0) or np.any(val <= 0):
        raise DomainError("log-log fit needs positive parameters and values")
    return _linfit(np.log(eps), np.log(val))


def fit_semilog_rate(series):
    """Slope of ``value`` against ``log(eps)``, for logarithmic growth laws."""
    eps, val = np.asarray(series, dtype=float).T
    if np.any(eps <= 0):
        raise DomainError("semilog fit needs positive parameters")
    return _linfit(np.log(eps), val)


# --------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class DataSpec:
    """Density profile.

    ``gaussian`` (exact cell averages, ``sigma=None`` means one cell
    width), ``indicator`` of a ball, ``cell`` (all mass in the cell at
    ``center``), ``random_indicator`` (each cell inside the ball switched on
    with probability ``fraction``, seeded) and the smooth compactly
    supported ``bump``. ``mass`` rescales the result when given.
    """

    kind: str = "gaussian"
    sigma: Optional[float] = 0.1
    radius: float = 0.25
    center: Optional[tuple] = None
    mass: Optional[float] = 1.0
    fraction: float = 0.5

    def __post_init__(self):
        if self.kind not in DATA_KINDS:
            raise InvalidParameterError(f"unknown data kind {self.kind!r}; expected one of {DATA_KINDS}")
        if self.sigma is not None and not self.sigma > 0:
            raise InvalidParameterError("sigma must be > 0")
        if not self.radius > 0:
            raise InvalidParameterError("radius must be > 0")
        if not 0 < self.fraction <= 1:
            raise InvalidParameterError("fraction must lie in (0, 1]")


def build_data(spec: DataSpec, grid: Grid, seed: int = 0) -> ScalarField:
    center = None if spec.center is None else np.asarray(spec.center, dtype=float)[: grid.dim]
    if spec.kind == "gaussian":
        f = gaussian_density(grid, spec.sigma or grid.h, center=center)
    elif spec.kind == "indicator":
        f = indicator_ball(grid, spec.radius, center=center)
    elif spec.kind == "cell":
        c = np.zeros(grid.dim) if center is None else center
        idx = tuple(int(np.floor((c[k] + grid.L / 2) / grid.h)) % grid.n for k in range(grid.dim))
        v = np.zeros(grid.shape)
        v[idx] = 1.0 / grid.cell_volume
        f = ScalarField(grid, v)
    elif spec.kind == "random_indicator":
        rng = np.random.default_rng(seed)
        ball = indicator_ball(grid, spec.radius, center=center).values
        f = ScalarField(grid, ball * (rng.random(grid.shape) < spec.fraction))
    else:
        c = np.zeros(grid.dim) if center is None else center
        r2 = sum(grid.wrap(x - c[k]) ** 2 for k, x in enumerate(grid.centers())) / spec.radius**2
        v = np.zeros(grid.shape)
        inside = r2 < 1
        v[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
        f = ScalarField(grid, v)
    if spec.mass is not None:
        m = f.mass()
        if m == 0:
            raise InvalidParameterError("profile has zero mass on this grid")
        f = f * (spec.mass / m)
    return f


@dataclass(frozen=True)
class Scenario:
    """Base problem: grid, initial datum, velocity, diffusivity and horizon."""

    dim: int = 1
    n: int = 1024
    L: float = 1.0
    initial: DataSpec = field(default_factory=DataSpec)
    velocity: Optional[FieldFamilySpec] = None
    kappa: float = 0.0
    t_final: float = 1.0
    scheme: str = "explicit"
    dt: Optional[float] = None
    cfl: float = 0.9

    def grid(self) -> Grid:
        return Grid(self.dim, self.n, self.L)

    def config(self, kappa=None, **kw) -> SolverConfig:
        return SolverConfig(kappa=self.kappa if kappa is None else kappa, t_final=self.t_final,
                            dt=self.dt, scheme=self.scheme, cfl_target=self.cfl, **kw)

    def velocity_field(self, grid: Grid) -> VectorField:
        return VectorField.zeros(grid) if self.velocity is None else generate_field(self.velocity, grid)


@dataclass(frozen=True)
class SweepSpec:
    """One parameter sweep.

    ``params`` are the perturbation sizes in descending order: velocity
    perturbation size, ``|kappa1 - kappa2|``, data perturbation scale, or
    mollification radius. A sweep has at least four values spanning
    ``min_decades`` decades (two by default), unless every value is zero
    (a control run).

    ``delta_policy`` is ``matched`` (delta follows the perturbation) or
    ``fixed`` (``delta`` throughout). ``delta`` doubles as the fixed
    reference scale reported next to the matched values.
    """

    channel: str
    params: tuple
    scenario: Scenario = field(default_factory=Scenario)
    cost: str = "LogDelta"
    delta_policy: str = "matched"
    delta: float = 1e-4
    method: str = "exact"
    seed: int = 0
    p: float = 2.0
    q: float = 2.0
    wavelength_factor: float = 4.0
    kappa_policy: str = "proportional"
    kappa_ratio: float = 2.0
    kappa_sum: float = 1.25
    kappa_base: float = 0.25
    perturbation: str = "mollify"
    vorticity: DataSpec = field(default_factory=lambda: DataSpec("indicator", radius=0.25, mass=None))
    p_values: tuple = (1.0, 1.25, 1.5)
    ball_radius: float = 0.4
    cap: int = DEFAULT_CAP
    on_overflow: str = "error"
    reg: float = 1e-2
    bounded_factor: float = 10.0
    stability_factor: float = 3.0
    min_decades: float = 2.0

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise InvalidParameterError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        params = tuple(float(x) for x in self.params)
        object.__setattr__(self, "params", params)
        if not params:
            raise InvalidParameterError("params must not be empty")
        if any(not np.isfinite(x) or x < 0 for x in params):
            raise InvalidParameterError("params must be finite and >= 0")
        if any(a < b for a, b in zip(params, params[1:])):
            raise InvalidParameterError("params must be in descending order")
        if any(x > 0 for x in params):
            if len(params) < 4:
                raise InvalidParameterError("a sweep needs at least 4 parameter values")
            pos = [x for x in params if x > 0]
            if math.log10(max(pos) / min(pos)) < self.min_decades - 1e-9:
                raise InvalidParameterError(f"parameter values must span at least {self.min_decades:g} decades")
        if self.cost not in ("W1", "LogDelta", "Tanh"):
            raise InvalidParameterError(f"unknown cost {self.cost!r}")
        if self.delta_policy not in ("matched", "fixed"):
            raise InvalidParameterError("delta_policy must be 'matched' or 'fixed'")
        if not self.delta > 0:
            raise InvalidParameterError("delta must be > 0")
        if self.method not in ("exact", "sinkhorn"):
            raise InvalidParameterError("method must be 'exact' or 'sinkhorn'")
        if self.kappa_policy not in ("proportional", "fixed_sum", "fixed_base"):
            raise InvalidParameterError("kappa_policy must be proportional, fixed_sum or fixed_base")
        if self.perturbation not in ("mollify", "block"):
            raise InvalidParameterError("perturbation must be 'mollify' or 'block'")
        if not self.p >= 1 or not self.q >= 1:
            raise InvalidParameterError("p and q must be >= 1")

    def cost_for(self, delta: float) -> CostFunction:
        if self.cost == "LogDelta":
            return CostFunction.log_delta(delta)
        return CostFunction(self.cost)

    def as_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


# --------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    """Rows of per-parameter results with a fitted rate and a verdict."""

    channel: str
    rows: list
    slope: Optional[float]
    interval: Optional[tuple]
    verdict: dict
    provenance: dict
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return _jsonable({
            "channel": self.channel,
            "rows": self.rows,
            "slope": self.slope,
            "interval": self.interval,
            "verdict": self.verdict,
            "provenance": self.provenance,
            "extra": self.extra,
        })

    def to_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")
        return path

    def to_csv(self, path) -> Path:
        path = Path(path)
        cols = list(self.rows[0]) if self.rows else []
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_cell(r.get(c)) for c in cols])
        return path

    def to_svg(self, path, x: str = "param", y: Optional[str] = None) -> Path:
        """Log-log plot of column ``y`` against ``x`` with the fitted line."""
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        y = y or self.extra.get("plot_column")
        xs = np.array([r[x] for r in self.rows], dtype=float)
        ys = np.array([r[y] for r in self.rows], dtype=float)
        keep = (xs > 0) & (ys > 0)
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.loglog(xs[keep], ys[keep], "o-", label=y)
        if keep.sum() >= 3:
            s, _ = fit_loglog_rate(list(zip(xs[keep], ys[keep])))
            c = np.exp(np.mean(np.log(ys[keep]) - s * np.log(xs[keep])))
            ax.loglog(xs[keep], c * xs[keep] ** s, "--", label=f"slope {s:.3f}")
        ax.set_xlabel(x)
        ax.set_ylabel(y)
        ax.set_title(self.channel)
        ax.legend()
        fig.tight_layout()
        path = Path(path)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return path


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(_jsonable(v))
    return v


def _ratio(values) -> float:
    vals = np.abs(np.asarray(values, dtype=float))
    if vals.size == 0:
        return 1.0
    if vals.min() == 0:
        return math.inf if vals.max() > 0 else 1.0
    return float(vals.max() / vals.min())


def _provenance(spec: SweepSpec, dts: dict) -> dict:
    return {
        "spec": spec.as_dict(),
        "dt": dts,
        "tolerances": {
            "balance_rtol": 1e-10,
            "split_threshold": "1e-13 * max|theta| * h^d",
            "bounded_factor": spec.bounded_factor,
            "stability_factor": spec.stability_factor,
        },
    }


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _distance(spec: SweepSpec, a: ScalarField, b: ScalarField, cost: CostFunction):
    return distance(a, b, cost, method=spec.method, reg=spec.reg, cap=spec.cap, on_overflow=spec.on_overflow)


def _face_lp(u: VectorField, p: float) -> float:
    """``L^p`` norm of the face samples, each face carrying one cell volume."""
    mag2 = sum(c**2 for c in u.components)
    return float((np.sum(mag2 ** (p / 2)) * u.grid.cell_volume) ** (1 / p))


# --------------------------------------------------------------------------
# velocity channel


def _oscillatory_unit(grid: Grid, eps: float, factor: float) -> VectorField:
    m = max(1, int(round(grid.L / (factor * eps))))
    return generate_field(FieldFamilySpec("oscillatory", amplitude=1.0, n=m), grid)


def sweep_velocity(spec: SweepSpec, jobs: int = 1) -> ExperimentReport:
    """Perturb the velocity by oscillations of wavelength ``~ wavelength_factor * eps``
    scaled so that ``||u - u_eps||_{L1(Lp)} = eps``, and compare solutions.

    Reports ``D_delta`` at matched delta (the measured perturbation norm) and
    at the fixed reference ``spec.delta``. The verdict requires the matched
    distances to stay within ``bounded_factor``; the rate is the slope of the
    fixed-delta distance against ``log(eps)``.
    """
    if spec.channel != "velocity":
        raise InvalidParameterError("spec.channel must be 'velocity'")
    sc = spec.scenario
    grid = sc.grid()
    theta0 = build_data(sc.initial, grid, spec.seed)
    u = sc.velocity_field(grid)
    T = sc.t_final
    theta_T, diag = solve(theta0, u, sc.config(q=spec.q))
    qnorm = float(np.max(diag.lq))

    def point(eps):
        if eps == 0:
            pert = VectorField.zeros(grid)
        else:
            unit = _oscillatory_unit(grid, eps, spec.wavelength_factor)
            pert = unit * (eps / (T * _face_lp(unit, spec.p)))
        measured = T * _face_lp(pert, spec.p)
        th, dg = solve(theta0, u + pert, sc.config(q=spec.q), record=False)
        delta = measured if spec.delta_policy == "matched" else spec.delta
        if delta == 0:
            matched = 0.0
            prov = None
        else:
            d = _distance(spec, theta_T, th, spec.cost_for(delta))
            matched, prov = float(d), d.provenance
        fixed = float(_distance(spec, theta_T, th, spec.cost_for(spec.delta)))
        w1 = float(_distance(spec, theta_T, th, CostFunction.w1()))
        rhs = 1.0 + (measured / delta if delta > 0 else 0.0)
        return {
            "param": eps,
            "delta": delta,
            "velocity_gap": measured,
            "D_matched": matched,
            "D_fixed": fixed,
            "W1": w1,
            "rhs": rhs,
            "fitted_C": matched / rhs,
            "dt": dg.dt,
            "distance_provenance": prov,
        }

    rows = _map(point, spec.params, jobs)
    pos = [r for r in rows if r["param"] > 0]
    ratio = _ratio([r["D_matched"] for r in pos]) if pos else 1.0
    slope = interval = None
    if len(pos) >= 3:
        slope, interval = fit_semilog_rate([(r["param"], r["D_fixed"]) for r in pos])
    verdict = {
        "kind": "bounded",
        "ratio": ratio,
        "passed": bool(ratio <= spec.bounded_factor),
        "growth_slope_vs_log_eps": slope,
        "C_max": max((r["fitted_C"] for r in rows), default=0.0),
    }
    extra = {"lq_reference": qnorm, "plot_column": "D_fixed"}
    return ExperimentReport("velocity", rows, slope, interval, verdict, _provenance(spec, {"base": diag.dt}), extra)


# --------------------------------------------------------------------------
# diffusivity channel


def _kappas(spec: SweepSpec, dk: float):
    if spec.kappa_policy == "proportional":
        r = spec.kappa_ratio
        if not r > 1:
            raise InvalidParameterError("kappa_ratio must be > 1")
        k2 = dk / (r - 1)
        return k2 + dk, k2
    if spec.kappa_policy == "fixed_sum":
        if dk >= spec.kappa_sum:
            raise InvalidParameterError("|kappa1 - kappa2| must be below kappa_sum")
        return 0.5 * (spec.kappa_sum + dk), 0.5 * (spec.kappa_sum - dk)
    return spec.kappa_base + dk, spec.kappa_base


def sweep_diffusivity(spec: SweepSpec, jobs: int = 1) -> ExperimentReport:
    """Solve with two diffusivities per parameter ``|kappa1 - kappa2|``.

    ``kappa_policy``: ``proportional`` (``kappa1 = kappa_ratio * kappa2``),
    ``fixed_sum`` (``kappa1 + kappa2 = kappa_sum``) or ``fixed_base``
    (``kappa2 = kappa_base``). Reports ``W1``, the 1D cumulative oracle
    when available, ``D_delta``, the gradient term
    ``|kappa1 - kappa2| ||grad theta2||_{L1(L1)} / delta`` and the heat-kernel
    lower-bound constant ``W1 (sqrt k1 + sqrt k2) / (sqrt(T) |k1 - k2|)``.
    """
    if spec.channel != "diffusivity":
        raise InvalidParameterError("spec.channel must be 'diffusivity'")
    sc = spec.scenario
    grid = sc.grid()
    theta0 = build_data(sc.initial, grid, spec.seed)
    u = sc.velocity_field(grid)
    T = sc.t_final

    def point(dk):
        k1, k2 = _kappas(spec, dk) if dk > 0 else (sc.kappa, sc.kappa)
        t1, d1 = solve(theta0, u, sc.config(kappa=k1), record=False)
        t2, d2 = solve(theta0, u, sc.config(kappa=k2, q=spec.q))
        grad_l1 = float(np.trapezoid(d2.gradl1, d2.t))
        delta = dk if spec.delta_policy == "matched" else spec.delta
        w1 = float(_distance(spec, t1, t2, CostFunction.w1()))
        oracle = w1_1d_oracle(t1, t2) if grid.dim == 1 else None
        dd = float(_distance(spec, t1, t2, spec.cost_for(delta))) if delta > 0 else 0.0
        lb = w1 * (math.sqrt(k1) + math.sqrt(k2)) / (math.sqrt(T) * dk) if dk > 0 else None
        term = dk * grad_l1 / delta if delta > 0 else 0.0
        return {
            "param": dk,
            "kappa1": k1,
            "kappa2": k2,
            "delta": delta,
            "W1": w1,
            "W1_oracle": oracle,
            "D_delta": dd,
            "grad_l1_l1": grad_l1,
            "gradient_term": term,
            "rhs": 1.0 + term,
            "lower_bound_constant": lb,
            "dt": (d1.dt, d2.dt),
        }

    rows = _map(point, spec.params, jobs)
    pos = [r for r in rows if r["param"] > 0]
    slope = interval = None
    if len(pos) >= 3 and all(r["W1"] > 0 for r in pos):
        slope, interval = fit_loglog_rate([(r["param"], r["W1"]) for r in pos])
    ratio = _ratio([r["D_delta"] for r in pos]) if pos else 1.0
    lbs = [r["lower_bound_constant"] for r in pos]
    verdict = {
        "kind": "bounded",
        "ratio": ratio,
        "passed": bool(ratio <= spec.bounded_factor),
        "w1_slope": slope,
        "lower_bound_constant_min": min(lbs) if lbs else None,
        "lower_bound_constant_ratio": _ratio(lbs) if lbs else None,
    }
    return ExperimentReport("diffusivity", rows, slope, interval, verdict, _provenance(spec, {}),
                            {"plot_column": "W1"})


# --------------------------------------------------------------------------
# initial-data channel


def _perturb_data(spec: SweepSpec, theta0: ScalarField, eps: float) -> ScalarField:
    if eps == 0:
        return theta0
    if spec.perturbation == "mollify":
        return mollify(theta0, eps)
    factor = int(round(eps / theta0.grid.h))
    if factor < 1 or theta0.grid.n % factor:
        raise InvalidParameterError(f"block size {eps:g} is not a divisor of the grid")
    return block_average(theta0, factor)


def sweep_initial_data(spec: SweepSpec, jobs: int = 1) -> ExperimentReport:
    """Perturb the initial datum at scale ``eps`` (mollification or block
    averaging) and check ``D_delta(theta(T), theta_eps(T)) <= C (D_delta(theta0, theta0_eps) + 1)``
    with delta matched to ``eps``, alongside the strong ``L^q`` contraction."""
    if spec.channel != "initial_data":
        raise InvalidParameterError("spec.channel must be 'initial_data'")
    sc = spec.scenario
    grid = sc.grid()
    theta0 = build_data(sc.initial, grid, spec.seed)
    u = sc.velocity_field(grid)
    theta_T, diag = solve(theta0, u, sc.config(), record=False)

    def point(eps):
        th0 = _perturb_data(spec, theta0, eps)
        th, _ = solve(th0, u, sc.config(), record=False)
        delta = eps if spec.delta_policy == "matched" else spec.delta
        if eps == 0:
            d0 = dT = 0.0
        else:
            cost = spec.cost_for(delta)
            d0 = float(_distance(spec, theta0, th0, cost))
            dT = float(_distance(spec, theta_T, th, cost))
        strong0 = lq_norm(theta0 - th0, spec.q)
        strongT = lq_norm(theta_T - th, spec.q)
        return {
            "param": eps,
            "delta": delta,
            "D_initial": d0,
            "D_final": dT,
            "rhs": d0 + 1.0,
            "fitted_C": dT / (d0 + 1.0),
            "lq_initial": strong0,
            "lq_final": strongT,
            "l1_initial": lq_norm(theta0 - th0, 1),
            "strong_contraction": bool(strongT <= strong0 + 1e-8),
        }

    rows = _map(point, spec.params, jobs)
    pos = [r for r in rows if r["param"] > 0]
    cs = [r["fitted_C"] for r in pos]
    slope = interval = None
    if len(pos) >= 3 and all(r["l1_initial"] > 0 for r in pos):
        slope, interval = fit_loglog_rate([(r["param"], r["l1_initial"]) for r in pos])
    verdict = {
        "kind": "bounded",
        "C_max": max(cs) if cs else 0.0,
        "ratio": _ratio([r["D_final"] for r in pos]) if pos else 1.0,
        "passed": bool(all(r["strong_contraction"] for r in rows)
                       and (_ratio([r["D_final"] for r in pos]) <= spec.bounded_factor if pos else True)),
        "l1_slope": slope,
    }
    return ExperimentReport("initial_data", rows, slope, interval, verdict, _provenance(spec, {"base": diag.dt}),
                            {"plot_column": "D_final"})


# --------------------------------------------------------------------------
# rough fields


def _ball_lp(values: np.ndarray, mask: np.ndarray, p: float, dv: float) -> float:
    return float((np.sum(values[mask] ** p) * dv) ** (1 / p))


def rough_field_probe(spec: SweepSpec, jobs: int = 1) -> ExperimentReport:
    """Mollify a vorticity ``omega`` at the radii ``params`` and compare the
    Biot-Savart velocities.

    (a) For each ``p`` in ``p_values`` the ratio
    ``||u_n - u||_{Lp(B_s)} / (s^{d/p} W1(omega_n, omega))^{(d - p(d-1))/(d+p)}``
    is the fitted constant; its spread across the sweep is the stability
    ratio. (b) Solutions driven by ``u_n`` are compared pairwise with the
    bounded cost ``tanh`` and through the interpolation inequality with
    ``gamma = sqrt(delta)``.
    """
    if spec.channel != "rough_field":
        raise InvalidParameterError("spec.channel must be 'rough_field'")
    sc = spec.scenario
    grid = sc.grid()
    d = grid.dim
    if d != 2:
        raise InvalidParameterError("the rough-field probe is two-dimensional")
    for p in spec.p_values:
        if not 1 <= p < d / (d - 1):
            raise InvalidParameterError(f"p = {p} gives a nonpositive exponent; need 1 <= p < {d / (d - 1):g}")
    omega = build_data(spec.vorticity, grid, spec.seed)
    kernel = KernelSpec()
    u = kernel_convolve(kernel, omega)
    s = spec.ball_radius
    mask = sum(c**2 for c in grid.centers()) < s**2
    theta0 = build_data(sc.initial, grid, spec.seed)

    def point(eps):
        om = mollify(omega, eps) if eps > 0 else omega
        un = kernel_convolve(kernel, om)
        wd = distance(om, omega, CostFunction.w1(), cap=spec.cap, on_overflow=spec.on_overflow) if eps > 0 else None
        w1 = float(wd) if wd is not None else 0.0
        diff = un - u
        speed = np.sqrt((diff.cell_centered() ** 2).sum(axis=0))
        row = {"param": eps, "W1": w1, "w1_coarsen_factor": wd.provenance["coarsen_factor"] if wd else 1}
        for p in spec.p_values:
            lhs = _ball_lp(speed, mask, p, grid.cell_volume)
            expo = (d - p * (d - 1)) / (d + p)
            rhs = (s ** (d / p) * w1) ** expo
            row[f"lhs_p{p:g}"] = lhs
            row[f"rhs_p{p:g}"] = rhs
            row[f"C_p{p:g}"] = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        th, dg = solve(theta0, un, sc.config(), record=False)
        return row, th, dg.dt

    results = _map(point, spec.params, jobs)
    rows = [r for r, _, _ in results]
    thetas = [t for _, t, _ in results]
    pos = [r for r in rows if r["param"] > 0]
    stability = {f"{p:g}": _ratio([r[f"C_p{p:g}"] for r in pos]) if pos else 1.0 for p in spec.p_values}
    for p in spec.p_values:
        cmax = max((r[f"C_p{p:g}"] for r in rows), default=0.0)
        for r in rows:
            r[f"holds_p{p:g}"] = bool(r[f"lhs_p{p:g}"] <= cmax * r[f"rhs_p{p:g}"] * (1 + 1e-12))

    delta = spec.delta
    gamma = math.sqrt(delta)
    cauchy = []
    for k in range(len(rows) - 1):
        diff = thetas[k] - thetas[k + 1]
        rep = bound_otd_check(diff, gamma, delta, cap=spec.cap, on_overflow=spec.on_overflow)
        cauchy.append({"pair": (rows[k]["param"], rows[k + 1]["param"]), "Db": rep["lhs"],
                       "bound_rhs": rep["rhs"], "bound_passed": rep["passed"]})
    dbs = [c["Db"] for c in cauchy]
    decay = [dbs[k] / dbs[k + 1] if dbs[k + 1] > 0 else math.inf for k in range(len(dbs) - 1)]
    slope = interval = None
    if len(pos) >= 3 and all(r["W1"] > 0 for r in pos):
        slope, interval = fit_loglog_rate([(r["param"], r["W1"]) for r in pos])
    verdict = {
        "kind": "stable_constant",
        "stability_ratio": stability,
        "passed": bool(all(v <= spec.stability_factor for v in stability.values())),
        "inequality_holds": bool(all(r[k] for r in rows for k in r if k.startswith("holds_"))),
        "cauchy_decay_factors": decay,
    }
    return ExperimentReport("rough_field", rows, slope, interval, verdict, _provenance(spec, {"solve": results[0][2]}),
                            {"cauchy": cauchy, "plot_column": "W1"})


_DISPATCH = {
    "velocity": sweep_velocity,
    "diffusivity": sweep_diffusivity,
    "initial_data": sweep_initial_data,
    "rough_field": rough_field_probe,
}


def run_sweep(spec: SweepSpec, jobs: int = 1) -> ExperimentReport:
    """Dispatch ``spec`` to the sweep of its channel."""
    return _DISPATCH[spec.channel](spec, jobs=jobs)
