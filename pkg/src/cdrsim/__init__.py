"""Exactly solvable convection-diffusion-reaction systems.

Build similarity solutions W = t^mu y(x / t^alpha) of

    W_t = (D W_x)_x - (C W)_x + R,

certify them against the reduced ODE, derive equivalent systems and check
them independently with a finite-difference PDE solver.
"""

from .equivalence import (EquivalentSpec, continuity_identity_check, equivalent_rho,
                          equivalent_rho_numeric, equivalent_system)
from .families import FIG1, FIG2, catalog, custom_system, descriptor, instantiate
from .pde import Grid1D, compare, convergence_order, integrate, refinement_study
from .reduced_ode import certify, continuity_report, particle_number, residual
from .scaling import (SolvableSystem, derive_exponents, physical_fields, reconstruct_W,
                      scaling_symmetry_check, similarity_variable)

__version__ = "0.1.0"

__all__ = [
    "EquivalentSpec", "FIG1", "FIG2", "Grid1D", "SolvableSystem", "catalog", "certify",
    "compare", "continuity_identity_check", "continuity_report", "convergence_order",
    "custom_system", "derive_exponents", "descriptor", "equivalent_rho",
    "equivalent_rho_numeric", "equivalent_system", "instantiate", "integrate",
    "particle_number", "physical_fields", "reconstruct_W", "refinement_study", "residual",
    "scaling_symmetry_check", "similarity_variable",
]
