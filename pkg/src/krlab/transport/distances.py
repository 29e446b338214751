"""Kantorovich-Rubinstein distances between densities and derived checks."""
from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionError, InvalidParameterError, MassMismatchError, SizeError
from ..grid import ScalarField, VectorField, centered_gradient, coarsen, lq_norm
from .costs import CostFunction
from .exact import DEFAULT_CAP, exact_ot
from .measures import BALANCE_RTOL, signed_split
from .sinkhorn import sinkhorn_ot

__all__ = ["DistanceValue", "distance", "w1_1d_oracle", "bound_otd_check", "dtD_check", "kr_rate"]


class DistanceValue(float):
    """A float that carries its provenance record."""

    def __new__(cls, value, provenance):
        obj = super().__new__(cls, value)
        obj.provenance = provenance
        return obj


def w1_1d_oracle(mu: ScalarField, nu: ScalarField) -> float:
    """W1 in 1D as ``h * sum |F_mu - F_nu|`` with cumulative sums from the left edge.

    Independent of any transport solver; exact for data away from the
    periodic seam.
    """
    if mu.grid.dim != 1 or nu.grid.dim != 1:
        raise DimensionError("w1_1d_oracle needs 1D fields")
    if mu.grid != nu.grid:
        raise InvalidParameterError("fields live on different grids")
    h = mu.grid.h
    m1, m2 = mu.values.sum() * h, nu.values.sum() * h
    if abs(m1 - m2) > BALANCE_RTOL * max(abs(m1), abs(m2), 1e-300):
        raise MassMismatchError(f"masses differ: {m1!r} vs {m2!r}")
    F = np.cumsum((mu.values - nu.values) * h)
    return float(h * np.abs(F).sum())


def _check_pair(theta1, theta2) -> float:
    if theta1.grid != theta2.grid:
        raise InvalidParameterError("fields live on different grids")
    m1, m2 = theta1.mass(), theta2.mass()
    scale = max(lq_norm(theta1, 1), lq_norm(theta2, 1))
    if abs(m1 - m2) > BALANCE_RTOL * max(scale, 1e-300):
        raise MassMismatchError(f"masses differ: {m1!r} vs {m2!r}")
    return scale


def distance(theta1: ScalarField, theta2: ScalarField, cost: CostFunction, method: str = "exact",
             reg: float = 1e-2, cap: int = DEFAULT_CAP, threshold=None, on_overflow: str = "error",
             return_solution: bool = False):
    """Transport distance ``D_c(theta1, theta2)`` of equal-mass densities.

    Only the difference matters: common mass cancels before solving.

    Parameters
    ----------
    method : {"exact", "sinkhorn"}
    on_overflow : {"error", "coarsen", "sinkhorn"}
        What to do when the split exceeds ``cap`` support points under the
        exact method: raise, block-aggregate the difference by factors of two,
        or fall back to Sinkhorn.
    return_solution : bool
        Also return ``(pair, plan, potential)`` of the exact solve.

    Returns
    -------
    DistanceValue
        The value, with a ``provenance`` dict attached.
    """
    if method not in ("exact", "sinkhorn"):
        raise InvalidParameterError(f"unknown method {method!r}")
    if on_overflow not in ("error", "coarsen", "sinkhorn"):
        raise InvalidParameterError(f"unknown overflow policy {on_overflow!r}")
    scale = _check_pair(theta1, theta2)
    diff = theta1 - theta2
    factor = 1
    pair = signed_split(diff, threshold, mass_scale=scale)
    used = method
    if method == "exact" and pair.size > cap:
        if on_overflow == "error":
            raise SizeError(f"{pair.size} support points exceed the cap {cap}; "
                            "use method='sinkhorn' or on_overflow='coarsen'")
        if on_overflow == "sinkhorn":
            used = "sinkhorn"
        else:
            field = diff
            while pair.size > cap:
                if field.grid.n <= 2:
                    raise SizeError("cannot coarsen below two cells per axis")
                field = coarsen(field, 2)
                factor *= 2
                pair = signed_split(field, threshold, mass_scale=scale)
    provenance = {
        "method": used,
        "cost": cost.as_dict(),
        "reg": reg if used == "sinkhorn" else None,
        "support_points": pair.size,
        "cap": cap,
        "coarsen_factor": factor,
        "split": pair.meta,
        "grid": {"dim": theta1.grid.dim, "n": theta1.grid.n, "L": theta1.grid.L},
        "balance_rtol": BALANCE_RTOL,
    }
    if used == "exact":
        value, plan, pot = exact_ot(pair, cost, cap=max(cap, pair.size))
        out = DistanceValue(value, provenance)
        return (out, (pair, plan, pot)) if return_solution else out
    value, info = sinkhorn_ot(pair, cost, reg=reg)
    provenance.update({"debiased": info.debiased, "iterations": info.iterations,
                       "marginal_error": info.marginal_error})
    out = DistanceValue(value, provenance)
    return (out, (pair, None, None)) if return_solution else out


def bound_otd_check(theta: ScalarField, gamma: float, delta: float, cap: int = DEFAULT_CAP,
                    on_overflow: str = "error") -> dict:
    """Compare ``D^b(theta)`` with ``D_delta(theta) / log(1/gamma) + (delta/gamma) ||theta||_1``.

    ``D^b`` is the distance for the bounded cost ``tanh``; ``theta`` has zero
    total mass.
    """
    for name, v in (("gamma", gamma), ("delta", delta)):
        if not 0 < v < 1:
            raise InvalidParameterError(f"{name} must lie in (0, 1), got {v}")
    zero = ScalarField.zeros(theta.grid)
    db = distance(theta, zero, CostFunction.tanh(), cap=cap, on_overflow=on_overflow)
    dd = distance(theta, zero, CostFunction.log_delta(delta), cap=cap, on_overflow=on_overflow)
    l1 = lq_norm(theta, 1)
    rhs = float(dd) / math.log(1 / gamma) + delta / gamma * l1
    return {
        "gamma": gamma,
        "delta": delta,
        "lhs": float(db),
        "rhs": rhs,
        "D_delta": float(dd),
        "l1": l1,
        "slack": rhs - float(db),
        "passed": float(db) <= rhs * (1 + 1e-12) + 1e-15,
    }


def kr_rate(theta1: ScalarField, theta2: ScalarField, u1: VectorField, u2: VectorField,
            kappa1: float, kappa2: float, zeta: np.ndarray, gradient: str = "centered") -> float:
    """``int grad(zeta) . (u1 theta1 - u2 theta2) - int grad(zeta) . (kappa1 grad theta1 - kappa2 grad theta2)``.

    ``gradient="centered"`` uses cell-centred differences and cell-averaged
    velocities; ``"face"`` pairs forward differences of ``zeta`` with the
    scheme's own face fluxes, which is the exact discrete counterpart.
    """
    grid = theta1.grid
    h, dv = grid.h, grid.cell_volume
    total = 0.0
    if gradient == "centered":
        gz = centered_gradient(zeta, h)
        g1 = centered_gradient(theta1.values, h)
        g2 = centered_gradient(theta2.values, h)
        c1, c2 = u1.cell_centered(), u2.cell_centered()
        for k in range(grid.dim):
            flux = c1[k] * theta1.values - c2[k] * theta2.values
            flux -= kappa1 * g1[k] - kappa2 * g2[k]
            total += float((gz[k] * flux).sum())
        return total * dv
    if gradient != "face":
        raise InvalidParameterError(f"unknown gradient mode {gradient!r}")
    for k in range(grid.dim):
        dz = (np.roll(zeta, -1, axis=k) - zeta) / h
        flux = np.zeros(grid.shape)
        for sign, u, th, kap in ((1.0, u1, theta1.values, kappa1), (-1.0, u2, theta2.values, kappa2)):
            c = u.components[k]
            right = np.roll(th, -1, axis=k)
            flux += sign * (np.maximum(c, 0) * th + np.minimum(c, 0) * right - kap * (right - th) / h)
        total += float((dz * flux).sum())
    return total * dv


def dtD_check(theta1, theta2, u1: VectorField, u2: VectorField, kappa1: float, kappa2: float,
              t: float, dt_fd: float, cost: CostFunction, gradient: str = "centered",
              cap: int = DEFAULT_CAP) -> dict:
    """Compare the centred difference of ``t -> D_c(theta1(t), theta2(t))`` with
    the dual-potential formula at ``t``.

    ``theta1`` and ``theta2`` are triples of fields at ``t - dt_fd``,
    ``t`` and ``t + dt_fd``. The potential of the solve at ``t`` is
    extended to every cell by its c-transform.
    """
    if len(theta1) != 3 or len(theta2) != 3:
        raise InvalidParameterError("trajectories must hold samples at t - dt, t, t + dt")
    if not dt_fd > 0:
        raise InvalidParameterError("dt_fd must be > 0")
    d_minus = float(distance(theta1[0], theta2[0], cost, cap=cap))
    d_plus = float(distance(theta1[2], theta2[2], cost, cap=cap))
    d_mid, (_, _, pot) = distance(theta1[1], theta2[1], cost, cap=cap, return_solution=True)
    fd = (d_plus - d_minus) / (2 * dt_fd)
    zeta = pot.on_grid(theta1[1].grid)
    formula = kr_rate(theta1[1], theta2[1], u1, u2, kappa1, kappa2, zeta, gradient)
    scale = max(abs(fd), abs(formula))
    gap = 0.0 if scale == 0 else abs(fd - formula) / scale
    return {
        "t": t,
        "dt_fd": dt_fd,
        "value": float(d_mid),
        "finite_difference": fd,
        "formula": formula,
        "relative_gap": gap,
        "cost": cost.as_dict(),
        "gradient": gradient,
    }
