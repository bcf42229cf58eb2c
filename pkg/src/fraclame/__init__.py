"""Numerical laboratory for fractional Navier-Lame systems with nonlocal coefficients."""
from .grid import GridSpec, VectorField
from .params import FractionalParams, ParameterError
from .nonlocal_form import Coefficient, CoefficientError, QuadratureSpec, validate_coefficient
from .spectral import LameSymbolConstants, derive_ell_constants
from .solver import DomainMask, SolveReport, SolverError, solve_dirichlet

__all__ = [
    "GridSpec", "VectorField", "FractionalParams", "ParameterError", "Coefficient", "CoefficientError",
    "QuadratureSpec", "validate_coefficient", "LameSymbolConstants", "derive_ell_constants",
    "DomainMask", "SolveReport", "SolverError", "solve_dirichlet",
]
__version__ = "0.1.0"
