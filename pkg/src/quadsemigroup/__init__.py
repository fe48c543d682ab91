"""Numerical analysis of semigroups generated by accretive quadratic operators.

The package computes singular spaces and directional indices of complex
quadratic symbols, builds the time-dependent multiplier used to prove
short-time smoothing estimates, discretizes Weyl quantizations in a
truncated Hermite basis, and specializes everything to Ornstein-Uhlenbeck
and Fokker-Planck models.
"""

from quadsemigroup.errors import (
    ConsistencyError,
    DegenerateDirectionError,
    InputError,
    NotApplicableError,
    QuadError,
    ResourceError,
    ShapeError,
)
from quadsemigroup.symplectic_core import (
    HamiltonMap,
    QuadraticSymbol,
    evaluate,
    hamilton_map,
    make_symbol,
    phase_vector,
    poisson_bracket,
    polarized,
    symplectic_form,
    symplectic_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError",
    "DegenerateDirectionError",
    "HamiltonMap",
    "InputError",
    "NotApplicableError",
    "QuadError",
    "QuadraticSymbol",
    "ResourceError",
    "ShapeError",
    "evaluate",
    "hamilton_map",
    "make_symbol",
    "phase_vector",
    "poisson_bracket",
    "polarized",
    "symplectic_form",
    "symplectic_matrix",
]
