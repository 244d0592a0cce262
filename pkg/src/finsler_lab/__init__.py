"""Finsler norm geometry and a tug-of-war scheme for the Finsler infinity Laplacian.

Modules
-------
norms         norm variants, duals, subdifferential faces, validation
regularize    C^{1,1} regularisation by Minkowski sum with a Euclidean ball
operators     upper/lower infinity-Laplacian envelopes and their shifted versions
cones         conical test functions, mollified graphs, touching checks
grid          lattice stencil, dynamic-programming solver, convergence studies
consistency   continuum scheme values, consistency bracket, barrier signs
verify        comparison with cones, Lipschitz seminorms, infinity eigenvalue
game          Monte Carlo tug-of-war matching the discrete equation
scenario/cli  JSON scenarios and the ``finsler-lab`` command
"""

from .cones import conical_test_fn, psi_gauge, touching_check
from .functions import make_field
from .grid import Grid, build, solve_dirichlet
from .norms import (FinslerNorm, Inverted, PNorm, PolytopeH, PolytopeV, dual_norm,
                    subdifferential_face, validate_norm)
from .operators import infinity_operator
from .regularize import Regularized, regularize

__version__ = "0.1.0"

__all__ = [
    "FinslerNorm",
    "PNorm",
    "PolytopeH",
    "PolytopeV",
    "Inverted",
    "Regularized",
    "regularize",
    "dual_norm",
    "subdifferential_face",
    "validate_norm",
    "infinity_operator",
    "conical_test_fn",
    "psi_gauge",
    "touching_check",
    "make_field",
    "Grid",
    "build",
    "solve_dirichlet",
]
