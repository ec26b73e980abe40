"""Monotone finite-difference laboratory for drift-diffusion equations
with singular drifts."""

from .drift import (Constant, DriftSpec, Instability, Kinked, Linear, MollifierConfig,
                    NonSpectralReport, NonUniqueness, RadialPower, Sampled,
                    check_nonspectral, divergence, drift_from_dict, eval_drift, mollify)
from .errors import (ConfigurationError, ContractViolation, DriftlabError,
                     EmptySubdomainError, SolverDivergenceError)
from .fields import (LevelSetReport, NormSeries, ScalarField, Trajectory, bochner_norm,
                     dual_sobolev_norm, level_set_report, lp_norm, neg_part, pos_part,
                     steklov_average, truncate, weak_lp_quasinorm)
from .grid import (Domain, SpaceGrid, SubdomainSchedule, TimeGrid, build_grid,
                   quadrature, subdomain_grid)
from .kernels import BACKEND
from .solver import (ProblemSpec, SolveResult, SolverConfig, solve_dual, solve_primal,
                     step_matrix_report)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConfigurationError", "Constant", "ContractViolation", "Domain",
    "DriftSpec", "DriftlabError", "EmptySubdomainError", "Instability", "Kinked",
    "LevelSetReport", "Linear", "MollifierConfig", "NonSpectralReport", "NonUniqueness",
    "NormSeries", "ProblemSpec", "RadialPower", "Sampled", "ScalarField",
    "SolveResult", "SolverConfig", "SolverDivergenceError", "SpaceGrid",
    "SubdomainSchedule", "TimeGrid", "Trajectory", "bochner_norm", "build_grid",
    "check_nonspectral", "divergence", "drift_from_dict", "dual_sobolev_norm",
    "eval_drift", "level_set_report", "lp_norm", "mollify", "neg_part", "pos_part",
    "quadrature", "solve_dual", "solve_primal", "steklov_average", "step_matrix_report",
    "subdomain_grid", "truncate", "weak_lp_quasinorm",
]
