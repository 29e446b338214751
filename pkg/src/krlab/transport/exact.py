"""Exact transportation LP by network simplex, with certified duals."""
from __future__ import annotations

import itertools
import os

import numpy as np

for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

from ..errors import ConvergenceError, InvalidParameterError, SizeError  # noqa: E402
from .costs import CostFunction, pairwise_distance  # noqa: E402
from .measures import DualPotential, SignedMeasurePair, TransportPlan  # noqa: E402

__all__ = ["exact_ot", "certificates", "vertex_enumeration", "DEFAULT_CAP"]

DEFAULT_CAP = 2048


def _empty(pair, cost):
    dim = pair.pos_points.shape[1] if pair.pos_points.size else 1
    plan = TransportPlan(np.zeros(0, int), np.zeros(0, int), np.zeros(0), (0, 0))
    pot = DualPotential(np.zeros((0, dim)), np.zeros(0), 0, np.zeros((0, dim)), np.zeros(0), cost, pair.period)
    return 0.0, plan, pot


def exact_ot(pair: SignedMeasurePair, cost: CostFunction, cap: int = DEFAULT_CAP, max_iter: int = 10_000_000):
    """Minimal cost of moving the positive part onto the negative part.

    Solved exactly by network simplex. The LP duals are replaced by the
    c-transform of the target-side potential, which is c-Lipschitz on the
    whole space and can only raise the dual objective.

    Parameters
    ----------
    pair : SignedMeasurePair
    cost : CostFunction
    cap : int
        Largest admissible number of support points.

    Returns
    -------
    value : float
    plan : TransportPlan
    potential : DualPotential
    """
    if pair.size > cap:
        raise SizeError(
            f"{pair.size} support points exceed the exact-solver cap {cap}; "
            "coarsen the field or use sinkhorn_ot"
        )
    if pair.is_empty:
        return _empty(pair, cost)
    mass = pair.mass
    a = pair.pos_weights / mass
    b = pair.neg_weights / pair.neg_weights.sum()
    b *= a.sum() / b.sum()
    C = cost.evaluate(pair.distances())
    G, log = ot.emd(a, b, C, numItermax=max_iter, log=True)
    if log.get("result_code", 1) != 1:
        raise ConvergenceError(f"network simplex stopped: {log.get('warning')}")
    rows, cols = np.nonzero(G > 0)
    plan = TransportPlan(rows, cols, G[rows, cols] * mass, C.shape)
    value = float(mass * np.sum(G[rows, cols] * C[rows, cols]))

    # c-transform of the target potential: zeta(z) = min_j (c(|z - y_j|) - v_j)
    offsets = -np.asarray(log["v"], dtype=float)
    offsets -= offsets.min()
    zeta_pos = (C + offsets[None, :]).min(axis=1)
    c_nn = cost.evaluate(pairwise_distance(pair.neg_points, pair.neg_points, pair.period))
    zeta_neg = (c_nn + offsets[None, :]).min(axis=1)
    pot = DualPotential(
        points=np.vstack([pair.pos_points, pair.neg_points]),
        values=np.concatenate([zeta_pos, zeta_neg]),
        n_pos=len(zeta_pos),
        anchors=pair.neg_points,
        offsets=offsets,
        cost=cost,
        period=pair.period,
    )
    return value, plan, pot


def certificates(pair: SignedMeasurePair, cost: CostFunction, value, plan, potential) -> dict:
    """Duality gap, worst dual-feasibility violation, worst complementary
    slackness residual and marginal errors of an exact solve."""
    if pair.is_empty:
        return {"value": 0.0, "dual_value": 0.0, "gap": 0.0, "feasibility": 0.0,
                "slackness": 0.0, "marginal_error": 0.0}
    C = cost.evaluate(pair.distances())
    zp, zn = potential.pos_values, potential.neg_values
    dual = float(pair.pos_weights @ zp - pair.neg_weights @ zn)
    diff = zp[:, None] - zn[None, :]
    feas = float(np.max(np.abs(diff) - C))
    slack = float(np.max(np.abs(diff[plan.rows, plan.cols] - C[plan.rows, plan.cols]))) if len(plan) else 0.0
    marg = max(
        float(np.max(np.abs(plan.row_sums() - pair.pos_weights))),
        float(np.max(np.abs(plan.col_sums() - pair.neg_weights))),
    ) / pair.mass
    return {"value": value, "dual_value": dual, "gap": value - dual, "feasibility": max(feas, 0.0),
            "slackness": slack, "marginal_error": marg}


def vertex_enumeration(a, b, C) -> float:
    """Minimum of ``<P, C>`` over all vertices of the transportation polytope.

    Every basic solution is supported on ``m + k - 1`` cells; each such
    support with a nonsingular system and a nonnegative solution is a
    vertex. Exhaustive, so only for tiny instances.
    """
    a, b, C = np.asarray(a, float), np.asarray(b, float), np.asarray(C, float)
    m, k = C.shape
    if m * k > 20:
        raise SizeError("vertex enumeration is limited to m * k <= 20")
    if not np.isclose(a.sum(), b.sum(), rtol=1e-12, atol=0):
        raise InvalidParameterError("marginals must have equal mass")
    A = np.zeros((m + k, m * k))
    for i in range(m):
        A[i, i * k:(i + 1) * k] = 1
    for j in range(k):
        A[m + j, j::k] = 1
    rhs = np.concatenate([a, b])
    best = np.inf
    for support in itertools.combinations(range(m * k), m + k - 1):
        sub = A[:, support]
        if np.linalg.matrix_rank(sub) < m + k - 1:
            continue
        x, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.max(np.abs(sub @ x - rhs)) > 1e-12 * max(1.0, rhs.max()) or x.min() < -1e-14:
            continue
        best = min(best, float(np.dot(C.ravel()[list(support)], np.maximum(x, 0))))
    return best
