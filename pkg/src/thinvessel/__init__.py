"""Thin-vessel perfusion models: slender-body 1D solver, field reconstruction and a 3D-1D boundary-element solver."""

from __future__ import annotations

from .bem3d1d import (
    BemQuadrature,
    BemSolution,
    BoundaryMesh,
    assemble_bem,
    build_boundary_mesh,
    compare_to_1d,
    normal_derivative_operator,
    self_convergence,
    solve_3d1d,
    solve_bem,
    sphere_mesh,
)
from .config import RunConfig, RunReport
from .errors import (
    ConditioningError,
    ConfigError,
    ConvergenceError,
    CutoffZoneError,
    DomainError,
    GeometryValidationError,
    SingularityError,
    TipSingularityError,
    VesselError,
)
from .fields import (
    Cutoff,
    VelocityAnsatz,
    exterior_pressure,
    sample_fields,
    surface_pressure,
    theta_variation,
    velocity_ansatz,
)
from .geometry import (
    ArcCenterline,
    PolynomialCenterline,
    RadiusProfile,
    StraightCenterline,
    VesselGeometry,
    build_bishop_frame,
    locate,
    surface_jacobian,
    surface_normal,
    surface_point,
    validate_admissible,
)
from .greens import KernelContext, LineDensity, eval_green, sn_apply, straight_line_potential
from .solver1d import Mesh1D, Params, Solution1D, check_apriori_bounds, solve_1d

__all__ = [
    "ArcCenterline",
    "BemQuadrature",
    "BemSolution",
    "BoundaryMesh",
    "ConditioningError",
    "ConfigError",
    "ConvergenceError",
    "Cutoff",
    "CutoffZoneError",
    "DomainError",
    "GeometryValidationError",
    "KernelContext",
    "LineDensity",
    "Mesh1D",
    "Params",
    "PolynomialCenterline",
    "RadiusProfile",
    "RunConfig",
    "RunReport",
    "SingularityError",
    "Solution1D",
    "StraightCenterline",
    "TipSingularityError",
    "VelocityAnsatz",
    "VesselError",
    "VesselGeometry",
    "assemble_bem",
    "build_bishop_frame",
    "build_boundary_mesh",
    "check_apriori_bounds",
    "compare_to_1d",
    "eval_green",
    "exterior_pressure",
    "locate",
    "normal_derivative_operator",
    "sample_fields",
    "self_convergence",
    "sn_apply",
    "solve_1d",
    "solve_3d1d",
    "solve_bem",
    "sphere_mesh",
    "straight_line_potential",
    "surface_jacobian",
    "surface_normal",
    "surface_point",
    "surface_pressure",
    "theta_variation",
    "validate_admissible",
    "velocity_ansatz",
]
