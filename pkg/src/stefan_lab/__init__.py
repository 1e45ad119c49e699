"""Exact and numerical solutions of a travelling melting/evaporation Stefan problem in 1+3 dimensions."""

from .exact_stefan import SimilaritySolution, solve_parameters, u_of_omega, v_of_omega
from .model import REFERENCE_PARAMETERS, Diffusivity, Flux, InvalidParameters, PhysicalParameters, StefanProblem
from .reduced_bvp import ReducedProfiles, solve_reduced_bvp
from .special_functions import ConvergenceError, DomainError, lambert_w0, phi

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "Diffusivity",
    "DomainError",
    "Flux",
    "InvalidParameters",
    "PhysicalParameters",
    "REFERENCE_PARAMETERS",
    "ReducedProfiles",
    "SimilaritySolution",
    "StefanProblem",
    "lambert_w0",
    "phi",
    "solve_parameters",
    "solve_reduced_bvp",
    "u_of_omega",
    "v_of_omega",
]
