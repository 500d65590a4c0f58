"""Interior-penalty DG for convection-diffusion-reaction with recovery-based a posteriori estimates."""

from .adapt import AdaptConfig, adaptive_loop, mark
from .config import ConfigError, RunConfig, load_config, parse_config
from .dg import (
    DgSolution,
    DgSpace,
    SchemeParams,
    SolverError,
    assemble_system,
    error_norms,
    evaluate,
    solve,
)
from .estimators import EstimatorReport, build_report, convergence_orders, local_indicators
from .experiment import run_experiment, write_outputs
from .mesh import DomainSpec, MeshHierarchy, Triangulation, create_mesh, refine, refine_uniform
from .problem import BenchmarkCase, Coefficients, make_case
from .recovery import crosspoint_project, oswald_interpolate, recover_gradient

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "adaptive_loop",
    "mark",
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
    "DgSolution",
    "DgSpace",
    "SchemeParams",
    "SolverError",
    "assemble_system",
    "error_norms",
    "evaluate",
    "solve",
    "EstimatorReport",
    "build_report",
    "convergence_orders",
    "local_indicators",
    "run_experiment",
    "write_outputs",
    "DomainSpec",
    "MeshHierarchy",
    "Triangulation",
    "create_mesh",
    "refine",
    "refine_uniform",
    "BenchmarkCase",
    "Coefficients",
    "make_case",
    "crosspoint_project",
    "oswald_interpolate",
    "recover_gradient",
]
