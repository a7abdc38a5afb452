"""Dimension of attractors of continuous piecewise-linear iterated function systems."""
from .config import RunConfig
from .diagram import MarkovDiagram, build_diagram, irreducible_core, is_irreducible
from .errors import CplifsError
from .esc import EscVerdict, esc_scan, word_atlas
from .model import (
    AffineBranch,
    Cplifs,
    PiecewiseLinearMap,
    SelfSimilarSystem,
    branches_of,
    cylinder_intervals,
    generated_self_similar,
    invariant_interval,
    load_system,
    loads_system,
    validate_system,
)
from .oracle import box_dimension_estimate, chaos_game_sample, direct_pressure, natural_dimension_direct
from .partition import classify_overlaps, critical_points, monotonicity_partition
from .rational import Interval
from .report import dimension_report
from .spectral import assemble_matrix, dimension_lower_sequence, solve_diagram_dimension, spectral_radius

__all__ = [
    "AffineBranch", "Cplifs", "CplifsError", "EscVerdict", "Interval", "MarkovDiagram",
    "PiecewiseLinearMap", "RunConfig", "SelfSimilarSystem", "assemble_matrix",
    "box_dimension_estimate", "branches_of", "build_diagram", "chaos_game_sample",
    "classify_overlaps", "critical_points", "cylinder_intervals", "dimension_lower_sequence",
    "dimension_report", "direct_pressure", "esc_scan", "generated_self_similar",
    "invariant_interval", "irreducible_core", "is_irreducible", "load_system", "loads_system",
    "monotonicity_partition", "natural_dimension_direct", "solve_diagram_dimension",
    "spectral_radius", "validate_system", "word_atlas",
]
