"""Numerical laboratory for stability of advection-diffusion equations in
Kantorovich-Rubinstein distances with logarithmic costs."""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .grid import Grid, ScalarField, VectorField, gaussian_density, indicator_ball, lq_norm, mollify
from .velocity import FieldFamilySpec, KernelSpec, generate_field, kernel_convolve
from .solver import Diagnostics, SolverConfig, VelocitySchedule, solve
from .transport import CostFunction, distance, exact_ot, sinkhorn_ot, w1_1d_oracle
from .experiments import DataSpec, ExperimentReport, Scenario, SweepSpec, run_sweep

__all__ = [
    "__version__",
    "Grid",
    "ScalarField",
    "VectorField",
    "gaussian_density",
    "indicator_ball",
    "lq_norm",
    "mollify",
    "FieldFamilySpec",
    "KernelSpec",
    "generate_field",
    "kernel_convolve",
    "Diagnostics",
    "SolverConfig",
    "VelocitySchedule",
    "solve",
    "CostFunction",
    "distance",
    "exact_ot",
    "sinkhorn_ot",
    "w1_1d_oracle",
    "DataSpec",
    "ExperimentReport",
    "Scenario",
    "SweepSpec",
    "run_sweep",
]
