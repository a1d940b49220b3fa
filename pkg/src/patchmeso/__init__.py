"""Patch dynamics with infrequent mesoscale coupling between patches."""
from .coupling import (
    CouplingSpec,
    ExponentialForcing,
    HeldForcing,
    MesoSchedule,
    PolynomialForcing,
    SinusoidalForcing,
)
from .errors import (
    BlowupError,
    ConfigError,
    ConstraintError,
    DegenerateSpectrumError,
    GeometryError,
    IncompleteBasisError,
    PatchMesoError,
    QuadratureError,
)
from .evolve import FieldVector, direct_integrate, exact_solution, meso_run, meso_step, remainder_exact
from .errbound import bound_report, bound_sweep, macro_error_bound, remainder_bound
from .geometry import PatchGeometry, make_geometry
from .operator import assemble_boundary_matrix, assemble_operator, numeric_eigensystem, verify_transition_identity
from .spectral import EigenSystem, analytic_eigensystem

__version__ = "0.1.0"

__all__ = [
    "BlowupError",
    "ConfigError",
    "ConstraintError",
    "CouplingSpec",
    "DegenerateSpectrumError",
    "EigenSystem",
    "ExponentialForcing",
    "FieldVector",
    "GeometryError",
    "HeldForcing",
    "IncompleteBasisError",
    "MesoSchedule",
    "PatchGeometry",
    "PatchMesoError",
    "PolynomialForcing",
    "QuadratureError",
    "SinusoidalForcing",
    "analytic_eigensystem",
    "assemble_boundary_matrix",
    "assemble_operator",
    "bound_report",
    "bound_sweep",
    "direct_integrate",
    "exact_solution",
    "macro_error_bound",
    "make_geometry",
    "meso_run",
    "meso_step",
    "numeric_eigensystem",
    "remainder_bound",
    "remainder_exact",
    "verify_transition_identity",
]
