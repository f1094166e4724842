"""Homogenized heat conduction on periodic planar graphs."""
from .cell_graph import (
    PatternError, UnitCellPattern, load_pattern, parse_pattern, periodic_identification, validate,
)
from .tensor import build_incidence_system, compute_tensor, solve_canonical_fem, solve_tensor

__all__ = [
    "PatternError", "UnitCellPattern", "load_pattern", "parse_pattern", "periodic_identification",
    "validate", "build_incidence_system", "compute_tensor", "solve_canonical_fem", "solve_tensor",
]
