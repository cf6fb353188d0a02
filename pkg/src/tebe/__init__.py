"""Model knot solutions of the twisted extended Bogomolny equations.

Solves the singular ODE system for the profile functions ``(u, v)``, continues
it in the twist ``zeta``, rebuilds the gauge fields and certifies identities,
bounds and the linearized operator.
"""
from .params import DomainError, ModelParams, param_conversions
from .ode import State, first_integral, rhs_sigma, rhs_tau, witten_u0
from .series import NearZeroExpansion, derive_recurrence, farfield_residuals
from .solver import (ContinuationRun, Profile, SolverConfig, StepPolicy, continue_in_zeta,
                     cross_residual, integrate, shoot)
from .fields import error_form_check, pde_residual, unitary_fields
from .linop import assemble_phi, coefficient_limits, indicial_roots
from .verify import DiagnosticsReport, check_all, fit_constants

__version__ = "0.1.0"

__all__ = [
    "DomainError", "ModelParams", "param_conversions", "State", "first_integral", "rhs_sigma",
    "rhs_tau", "witten_u0", "NearZeroExpansion", "derive_recurrence", "farfield_residuals",
    "ContinuationRun", "Profile", "SolverConfig", "StepPolicy", "continue_in_zeta",
    "cross_residual", "integrate", "shoot", "error_form_check", "pde_residual",
    "unitary_fields", "assemble_phi", "coefficient_limits", "indicial_roots",
    "DiagnosticsReport", "check_all", "fit_constants",
]
