"""Numerical laboratory for the fractional p-Laplacian with a concave-convex critical nonlinearity."""

from ._backend import DEFAULT as BACKEND, HAVE_COMPILED
from .grid import (Domain, Grid, GridFunction, ProblemParams, build_grid, cs0_norm,
                   lr_norm, read_csv, write_csv)
from .kernel import KernelContext, tail_weight

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "HAVE_COMPILED", "Domain", "Grid", "GridFunction", "KernelContext",
    "ProblemParams", "build_grid", "cs0_norm", "lr_norm", "read_csv", "tail_weight",
    "write_csv", "__version__",
]
