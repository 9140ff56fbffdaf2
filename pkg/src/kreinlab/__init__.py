"""Positive and sectorial extensions of singular Sturm-Liouville operators."""

from .classify import (EndpointKind, GaugeFunction, classify_endpoint, jacobi_residual, kalf_check,
                       oscillation_test, principal_pair)
from .errors import KreinLabError
from .expr import Expression, differentiate, parse
from .extensions import (BracketMatrix, BracketScalar, Friedrichs, RobinLP, SectorialArlinskii, SectorialKrein,
                         kernel_basis, krein, lc_matrix_family, lc_scalar_family, lp_family, sectorial_arlinskii,
                         sectorial_krein)
from .forms import Sector, TrialFunction, extension_form, friedrichs_form, rayleigh_check, sector_check
from .ode import integrate, wronskian
from .oracle import Dirichlet, Robin, discretize, eigenvalues_discrete
from .problem import SLProblem, TruncationPolicy, improper_integral, validate
from .spectral import eigenfunction, eigenvalues_bracket, eigenvalues_real, eigenvalues_sectorial

__all__ = [
    "BracketMatrix", "BracketScalar", "Dirichlet", "EndpointKind", "Expression", "Friedrichs", "GaugeFunction",
    "KreinLabError", "Robin", "RobinLP", "SLProblem", "Sector", "SectorialArlinskii", "SectorialKrein",
    "TrialFunction", "TruncationPolicy", "classify_endpoint", "differentiate", "discretize", "eigenfunction",
    "eigenvalues_bracket", "eigenvalues_discrete", "eigenvalues_real", "eigenvalues_sectorial", "extension_form",
    "friedrichs_form", "improper_integral", "integrate", "jacobi_residual", "kalf_check", "kernel_basis", "krein",
    "lc_matrix_family", "lc_scalar_family", "lp_family", "oscillation_test", "parse", "principal_pair",
    "rayleigh_check", "sector_check", "sectorial_arlinskii", "sectorial_krein", "validate", "wronskian",
]
