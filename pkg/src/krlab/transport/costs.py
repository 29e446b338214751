"""Concave transport costs ``c(|x - y|)`` and periodic distance matrices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import InvalidParameterError

__all__ = ["CostFunction", "pairwise_distance", "cost_matrix"]

_KINDS = ("W1", "LogDelta", "Tanh")


@dataclass(frozen=True)
class CostFunction:
    """Cost ``c(z)`` applied to the distance ``z >= 0``.

    ``W1``: ``c(z) = z``; ``LogDelta``: ``c(z) = log(z / delta + 1)``;
    ``Tanh``: ``c(z) = tanh(z)``. All three are concave, nondecreasing and
    vanish at zero, so ``c(|x - y|)`` is a metric.
    """

    kind: str = "W1"
    delta: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidParameterError(f"unknown cost kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "LogDelta":
            if self.delta is None or not (np.isfinite(self.delta) and self.delta > 0):
                raise InvalidParameterError(f"LogDelta needs delta > 0, got {self.delta}")
        elif self.delta is not None:
            raise InvalidParameterError(f"{self.kind} takes no delta")

    @classmethod
    def w1(cls) -> "CostFunction":
        return cls("W1")

    @classmethod
    def log_delta(cls, delta: float) -> "CostFunction":
        return cls("LogDelta", float(delta))

    @classmethod
    def tanh(cls) -> "CostFunction":
        return cls("Tanh")

    def evaluate(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "W1":
            return z.copy()
        if self.kind == "LogDelta":
            return np.log1p(z / self.delta)
        return np.tanh(z)

    __call__ = evaluate

    @property
    def lipschitz_constant(self) -> float:
        return 1.0 / self.delta if self.kind == "LogDelta" else 1.0

    @property
    def label(self) -> str:
        return f"LogDelta({self.delta:g})" if self.kind == "LogDelta" else self.kind

    def as_dict(self) -> dict:
        return {"kind": self.kind, "delta": self.delta}


def pairwise_distance(x: np.ndarray, y: np.ndarray, period: Optional[float] = None) -> np.ndarray:
    """Distances between rows of ``x`` (m, d) and ``y`` (k, d); minimal image when
    ``period`` is given."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    sq = np.zeros((x.shape[0], y.shape[0]))
    for k in range(x.shape[1]):
        diff = np.abs(x[:, k, None] - y[None, :, k])
        if period is not None:
            diff = np.mod(diff, period)
            diff = np.minimum(diff, period - diff)
        sq += diff * diff
    return np.sqrt(sq)


def cost_matrix(x, y, cost: CostFunction, period: Optional[float] = None) -> np.ndarray:
    return cost.evaluate(pairwise_distance(x, y, period))
