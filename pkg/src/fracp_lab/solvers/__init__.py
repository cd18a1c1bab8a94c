"""Variational solvers on a fixed grid."""

from .elliptic import (LambdaBracket, bifurcation_csv, blowup_threshold, estimate_Lambda,
                       first_eigenpair, lambda_sweep, minimal_solution, monotone_iteration,
                       rayleigh_quotient, residual_norm, solve_dirichlet, solve_Q, subsolution_scale,
                       torsion)
from .genus import GenusBound, genus_level_upper, genus_levels
from .mountain import PathProfile, mountain_pass_solve, path_profile
from .report import SolveReport

__all__ = [
    "GenusBound", "LambdaBracket", "PathProfile", "SolveReport", "bifurcation_csv",
    "blowup_threshold", "estimate_Lambda", "first_eigenpair", "genus_level_upper",
    "genus_levels", "lambda_sweep", "minimal_solution", "monotone_iteration",
    "mountain_pass_solve", "path_profile", "rayleigh_quotient", "residual_norm",
    "solve_dirichlet", "solve_Q", "subsolution_scale", "torsion",
]
