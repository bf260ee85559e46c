"""Monotone shift schemes for periodic 1-D Hamilton-Jacobi equations, with adjoint-measure diagnostics."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .adjoint import (
    AdjointTrajectory,
    DiscreteMeasure,
    HDerivativeReport,
    assemble_stencil,
    compensated_energy,
    energy_flux_integral,
    h_derivative_estimate,
    linearized_apply,
    propagate_adjoint,
    representation_residual,
)
from .grid import GridError, GridFunction, PeriodicGrid, ShiftParam, delta, integrate, inner, second_delta, verify_identities
from .hamiltonians import Hamiltonian, NumericalFlux, UnsupportedOperation, gamma_bound, legendre
from .initial_data import InitialData
from .oracle import ExactSolution, fine_reference, hopf_lax, sup_distance
from .solver import (
    CFLViolation,
    InsufficientTrajectory,
    SolverConfig,
    Trajectory,
    advance,
    evolve_gradient,
    evolve_second,
    monitor_bounds,
    solve,
)
from .toy import ToyProblem, direct_solve, exact_solution, rational_closed_form, series_solution, stationary_adjoint, toy_rate_check

__all__ = [
    "__version__",
    "BACKEND",
    "AdjointTrajectory",
    "DiscreteMeasure",
    "HDerivativeReport",
    "assemble_stencil",
    "compensated_energy",
    "energy_flux_integral",
    "h_derivative_estimate",
    "linearized_apply",
    "propagate_adjoint",
    "representation_residual",
    "GridError",
    "GridFunction",
    "PeriodicGrid",
    "ShiftParam",
    "delta",
    "integrate",
    "inner",
    "second_delta",
    "verify_identities",
    "Hamiltonian",
    "NumericalFlux",
    "UnsupportedOperation",
    "gamma_bound",
    "legendre",
    "InitialData",
    "ExactSolution",
    "fine_reference",
    "hopf_lax",
    "sup_distance",
    "CFLViolation",
    "InsufficientTrajectory",
    "SolverConfig",
    "Trajectory",
    "advance",
    "evolve_gradient",
    "evolve_second",
    "monitor_bounds",
    "solve",
    "ToyProblem",
    "direct_solve",
    "exact_solution",
    "rational_closed_form",
    "series_solution",
    "stationary_adjoint",
    "toy_rate_check",
]
