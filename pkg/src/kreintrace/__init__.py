"""Krein-string Dirichlet-to-Neumann solver and boundary-trace Monte Carlo."""

__version__ = "0.1.0"

from .strings import (Atom, Const, KreinString, Piece, Power, SymPower,
                      StringSpecError, StringValidationError, build_string,
                      builtin)
from .krein import (CBFReport, ConvergenceError, DomainError,
                    FundamentalState, SpectralFunctionTable, SpectralMu,
                    bounded_solution, bounded_solution_profile, cbf_check,
                    integrate_fundamental, mu_at_zero, mu_table, spectral_mu)

__all__ = [
    "Atom", "Const", "KreinString", "Piece", "Power", "SymPower",
    "StringSpecError", "StringValidationError", "build_string", "builtin",
    "CBFReport", "ConvergenceError", "DomainError", "FundamentalState",
    "SpectralFunctionTable", "SpectralMu", "bounded_solution",
    "bounded_solution_profile", "cbf_check", "integrate_fundamental",
    "mu_at_zero", "mu_table", "spectral_mu", "__version__",
]
