"""Entropy-regularised transport in the log domain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, InvalidParameterError
from .costs import CostFunction, pairwise_distance
from .measures import SignedMeasurePair

__all__ = ["sinkhorn_ot", "SinkhornPotentials", "sinkhorn_log"]


@dataclass
class SinkhornPotentials:
    """Approximate dual potentials with solver metadata.

    ``value`` is the transport cost of the entropic plan, ``dual_value`` the
    regularised objective and ``debiased`` the Sinkhorn divergence
    ``OT(a, b) - (OT(a, a) + OT(b, b)) / 2`` of the regularised objectives.
    """

    f: np.ndarray
    g: np.ndarray
    value: float
    dual_value: float
    debiased: float
    iterations: int
    marginal_error: float
    reg: float


def _lse(M, axis):
    m = M.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(M - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def logsumexp(M, axis):
    return _lse(M, axis)


def symmetric_potential(w, C, reg, max_iter=2000, tol=1e-9):
    """Self-transport potential by averaged fixed-point iteration.

    For the symmetric problem ``OT(w, w)`` the optimal potentials coincide,
    and the averaged update ``f <- (f + T f) / 2`` converges in few steps.
    """
    lw = np.log(w)
    f = np.zeros(len(w))
    for _ in range(max_iter):
        new = 0.5 * (f - reg * _lse((f[None, :] - C) / reg + lw[None, :], axis=1))
        done = np.max(np.abs(new - f)) <= tol * max(1.0, float(np.abs(new).max()))
        f = new
        if done:
            break
    return f


def sinkhorn_log(a, b, C, reg, max_iter=20000, tol=1e-9, f=None, g=None):
    """Log-domain Sinkhorn iterations.

    Returns ``(f, g, plan, iterations, marginal_error)``; the marginal error
    is the L1 violation of the row sums after a column update.
    """
    la, lb = np.log(a), np.log(b)
    f = np.zeros(len(a)) if f is None else f.copy()
    g = np.zeros(len(b)) if g is None else g.copy()
    err = np.inf
    for it in range(1, max_iter + 1):
        f = -reg * logsumexp((g[None, :] - C) / reg + lb[None, :], axis=1)
        g = -reg * logsumexp((f[:, None] - C) / reg + la[:, None], axis=0)
        if it % 10 == 0 or it == max_iter:
            logp = (f[:, None] + g[None, :] - C) / reg + la[:, None] + lb[None, :]
            err = float(np.abs(np.exp(logsumexp(logp, axis=1)) - a).sum())
            if err <= tol:
                break
    logp = (f[:, None] + g[None, :] - C) / reg + la[:, None] + lb[None, :]
    return f, g, np.exp(logp), it, err


def _solve_scaled(a, b, C, reg, max_iter, tol):
    """Sinkhorn with geometric reg-scaling from ``max(C)`` down to ``reg``."""
    f = g = None
    start = max(reg, float(C.max()) if C.size else reg)
    schedule = []
    r = start
    while r > reg:
        schedule.append(r)
        r /= 4
    schedule.append(reg)
    used = 0
    for r in schedule[:-1]:
        f, g, _, it, _ = sinkhorn_log(a, b, C, r, max_iter=200, tol=tol, f=f, g=g)
        used += it
    f, g, P, it, err = sinkhorn_log(a, b, C, reg, max_iter=max_iter, tol=tol, f=f, g=g)
    return f, g, P, used + it, err


def sinkhorn_ot(pair: SignedMeasurePair, cost: CostFunction, reg: float = 1e-2,
                max_iter: int = 20000, tol: float = 1e-9):
    """Entropic approximation of the transport cost.

    Parameters
    ----------
    reg : float
        Regularisation strength in cost units (relative to unit mass).
    tol : float
        Target L1 marginal violation, relative to the total mass.

    Returns
    -------
    value : float
        ``<P, C>`` for the entropic plan, scaled by the pair mass.
    potentials : SinkhornPotentials
    """
    if not (np.isfinite(reg) and reg > 0):
        raise InvalidParameterError(f"reg must be > 0, got {reg}")
    if pair.is_empty:
        z = np.zeros(0)
        return 0.0, SinkhornPotentials(z, z, 0.0, 0.0, 0.0, 0, 0.0, reg)
    mass = pair.mass
    a = pair.pos_weights / mass
    b = pair.neg_weights / pair.neg_weights.sum()
    C = cost.evaluate(pair.distances())
    f, g, P, iters, err = _solve_scaled(a, b, C, reg, max_iter, tol)
    if not err <= tol:
        raise ConvergenceError(f"sinkhorn did not reach tol {tol:g} in {max_iter} iterations", residual=err)
    value = float(mass * np.sum(P * C))
    dual = float(a @ f + b @ g)

    def self_term(x, w):
        Cxx = cost.evaluate(pairwise_distance(x, x, pair.period))
        fs = symmetric_potential(w, Cxx, reg, max_iter=max_iter, tol=tol)
        return float(2 * w @ fs)

    debiased = mass * (dual - 0.5 * self_term(pair.pos_points, a) - 0.5 * self_term(pair.neg_points, b))
    return value, SinkhornPotentials(f, g, value, mass * dual, debiased, iters, err, reg)
