"""Signed measures, transport plans and dual potentials."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InvalidParameterError, MassMismatchError
from ..grid import ScalarField
from .costs import CostFunction, pairwise_distance

__all__ = ["SignedMeasurePair", "TransportPlan", "DualPotential", "signed_split", "BALANCE_RTOL"]

BALANCE_RTOL = 1e-10


@dataclass
class SignedMeasurePair:
    """Positive and negative parts of a zero-mass discrete measure.

    ``period`` switches distances to the minimal-image metric. ``meta``
    records how the pair was produced (threshold, rebalancing factor,
    dropped mass).
    """

    pos_points: np.ndarray
    pos_weights: np.ndarray
    neg_points: np.ndarray
    neg_weights: np.ndarray
    period: Optional[float] = None
    pos_index: Optional[np.ndarray] = None
    neg_index: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.pos_weights = np.asarray(self.pos_weights, dtype=float).ravel()
        self.neg_weights = np.asarray(self.neg_weights, dtype=float).ravel()
        dim = None
        for name in ("pos_points", "neg_points"):
            pts = np.asarray(getattr(self, name), dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.size and dim is not None and pts.shape[1] != dim:
                raise InvalidParameterError("positive and negative points differ in dimension")
            if pts.size:
                dim = pts.shape[1]
            setattr(self, name, pts)
        if len(self.pos_weights) != len(self.pos_points) or len(self.neg_weights) != len(self.neg_points):
            raise InvalidParameterError("points and weights differ in length")
        if np.any(self.pos_weights <= 0) or np.any(self.neg_weights <= 0):
            raise InvalidParameterError("weights must be strictly positive")
        mp, mn = self.pos_weights.sum(), self.neg_weights.sum()
        if abs(mp - mn) > BALANCE_RTOL * max(mp, mn):
            raise MassMismatchError(f"unbalanced pair: positive mass {mp!r}, negative mass {mn!r}")

    @classmethod
    def from_points(cls, pos_points, pos_weights, neg_points, neg_weights, period=None):
        return cls(pos_points, pos_weights, neg_points, neg_weights, period=period)

    @property
    def mass(self) -> float:
        return float(self.pos_weights.sum())

    @property
    def size(self) -> int:
        return len(self.pos_weights) + len(self.neg_weights)

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    def swapped(self) -> "SignedMeasurePair":
        return SignedMeasurePair(self.neg_points, self.neg_weights, self.pos_points, self.pos_weights,
                                 period=self.period, pos_index=self.neg_index,
                                 neg_index=self.pos_index, meta=dict(self.meta))

    def distances(self) -> np.ndarray:
        return pairwise_distance(self.pos_points, self.neg_points, self.period)


def signed_split(theta: ScalarField, threshold: Optional[float] = None,
                 mass_scale: Optional[float] = None) -> SignedMeasurePair:
    """Split the cell weights ``theta * h**d`` into positive and negative parts.

    Cells with ``|weight| <= threshold`` are dropped (default
    ``1e-13 * max|theta| * h**d``); the lighter side is then scaled
    uniformly to the mass of the heavier one. Points are cell centres and
    distances are periodic.

    ``mass_scale`` sets the reference for the zero-mass test (default: the
    L1 norm of ``theta``); pass the norm of the operands when ``theta`` is a
    difference, so cancellation round-off is not mistaken for imbalance.
    """
    grid = theta.grid
    v = theta.values
    l1 = float(np.abs(v).sum() * grid.cell_volume)
    total = float(v.sum() * grid.cell_volume)
    ref = max(l1, mass_scale or 0.0)
    if abs(total) > BALANCE_RTOL * ref:
        raise MassMismatchError(f"field has nonzero total mass {total!r} (L1 norm {l1!r})")
    if threshold is None:
        threshold = 1e-13 * float(np.abs(v).max()) * grid.cell_volume
    if threshold < 0:
        raise InvalidParameterError("threshold must be >= 0")
    w = v.ravel() * grid.cell_volume
    pts = grid.points()
    ip = np.flatnonzero(w > threshold)
    im = np.flatnonzero(w < -threshold)
    wp, wm = w[ip], -w[im]
    mp, mm = wp.sum(), wm.sum()
    factor = 1.0
    if mp > 0 and mm > 0:
        if mp < mm:
            factor = mm / mp
            wp = wp * factor
        elif mm < mp:
            factor = mp / mm
            wm = wm * factor
    elif mp > 0 or mm > 0:
        raise MassMismatchError("thresholding removed one side of the measure entirely")
    dropped = float(np.abs(w).sum() - (np.abs(w[ip]).sum() + np.abs(w[im]).sum()))
    meta = {"threshold": float(threshold), "rebalance_factor": float(factor), "dropped_mass": dropped}
    return SignedMeasurePair(pts[ip], wp, pts[im], wm, period=grid.L, pos_index=ip, neg_index=im, meta=meta)


@dataclass
class TransportPlan:
    """Sparse coupling: ``mass[k]`` moves from source ``rows[k]`` to target ``cols[k]``."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.mass)
        return out

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, weights=self.mass, minlength=self.shape[0])

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.cols, weights=self.mass, minlength=self.shape[1])

    def __len__(self):
        return len(self.mass)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("i", "j", "mass"))
            for i, j, m in zip(self.rows, self.cols, self.mass):
                w.writerow((int(i), int(j), repr(float(m))))
        return path


@dataclass
class DualPotential:
    """Kantorovich potential on the union of supports.

    ``values[:m]`` sit on the positive support, ``values[m:]`` on the
    negative one. The potential is the c-transform
    ``zeta(z) = min_j (offsets[j] + c(|z - anchors[j]|))``, so
    :meth:`extend` evaluates it anywhere and it is c-Lipschitz everywhere.
    """

    points: np.ndarray
    values: np.ndarray
    n_pos: int
    anchors: np.ndarray
    offsets: np.ndarray
    cost: CostFunction
    period: Optional[float] = None

    def extend(self, points: np.ndarray, chunk: int = 2048) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if len(self.anchors) == 0:
            return np.zeros(points.shape[0])
        out = np.empty(points.shape[0])
        for s in range(0, points.shape[0], chunk):
            c = self.cost.evaluate(pairwise_distance(points[s:s + chunk], self.anchors, self.period))
            out[s:s + chunk] = (c + self.offsets[None, :]).min(axis=1)
        return out

    def on_grid(self, grid) -> np.ndarray:
        return self.extend(grid.points()).reshape(grid.shape)

    @property
    def pos_values(self) -> np.ndarray:
        return self.values[:self.n_pos]

    @property
    def neg_values(self) -> np.ndarray:
        return self.values[self.n_pos:]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("index", "zeta"))
            for i, z in enumerate(self.values):
                w.writerow((i, repr(float(z))))
        return path
