"""Nonlocal spatial Ramsey growth model: forward solver, adjoint and optimal consumption."""

__version__ = "0.1.0"

from .grid import Field, Grid, TimeGrid  # noqa: E402
from .kernels import GaussianKernel, NominalSpec  # noqa: E402
from .operators import ModelParams, ProductionSpec  # noqa: E402
from .forward import Scenario, SolverError, Trajectory, solve_forward, solve_picard  # noqa: E402
from .objective import AdmissibleSet, ObjectiveSpec, objective, project_admissible  # noqa: E402
from .adjoint import OptimizeConfig, adjoint_solve, optimize, reduced_gradient  # noqa: E402

__all__ = [
    "Field", "Grid", "TimeGrid", "GaussianKernel", "NominalSpec", "ModelParams", "ProductionSpec",
    "Scenario", "SolverError", "Trajectory", "solve_forward", "solve_picard", "AdmissibleSet",
    "ObjectiveSpec", "objective", "project_admissible", "OptimizeConfig", "adjoint_solve", "optimize",
    "reduced_gradient",
]
