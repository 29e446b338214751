"""Transport distances for concave costs: exact LP, entropic approximation,
one-dimensional oracle and the interpolation and derivative checks."""
from .costs import CostFunction, cost_matrix, pairwise_distance
from .distances import DistanceValue, bound_otd_check, distance, dtD_check, kr_rate, w1_1d_oracle
from .exact import DEFAULT_CAP, certificates, exact_ot, vertex_enumeration
from .measures import DualPotential, SignedMeasurePair, TransportPlan, signed_split
from .sinkhorn import SinkhornPotentials, sinkhorn_ot

__all__ = [
    "CostFunction",
    "cost_matrix",
    "pairwise_distance",
    "DistanceValue",
    "bound_otd_check",
    "distance",
    "dtD_check",
    "kr_rate",
    "w1_1d_oracle",
    "DEFAULT_CAP",
    "certificates",
    "exact_ot",
    "vertex_enumeration",
    "DualPotential",
    "SignedMeasurePair",
    "TransportPlan",
    "signed_split",
    "SinkhornPotentials",
    "sinkhorn_ot",
]
