"""Nonuniform dichotomy spectra, Lyapunov reductions, and finite-jet normal forms."""

__version__ = "0.1.0"

from .systems import SystemSpec, parse_system, eval_matrix, eval_nonlinearity
from .expressions import TimeExpression
from .evolution import EvolutionOperator, ShiftedOperator, build_evolution, propagate, shift
from .polyops import (
    CoeffVector,
    MultiIndexBasis,
    enumerate_basis,
    evolution_factorization,
    group_map,
    homological_operator,
    kronecker,
    kronecker_det,
    lift_derivation,
    lift_matrix,
)
