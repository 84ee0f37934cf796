"""Certified finite periodicity for piecewise contractions with the separation property."""
from .atoms import AtomBudgetExceeded, AtomSet, atom_diameter_bound, refine_atoms
from .certifier import Certificate, Inconclusive, LimitCycle, basin_labels, certify, locate_cycle, match_cycles, persistence_radius, transition_graph
from .genericity import RepairFailed, RepairResult, extend_map, repair
from .geometry import Box, BoxCover, Metric, hausdorff
from .io import SpecError, emit_certificate, emit_map_spec, parse_map_spec
from .orbits import BranchPolicy, iterate_orbit
from .partition import Partition, separation_line, validate_partition
from .pwmap import AffinePiece, PiecewiseMap, PluginPiece, is_epsilon_perturbation, validate_map

__all__ = [
    "AffinePiece",
    "AtomBudgetExceeded",
    "AtomSet",
    "Box",
    "BoxCover",
    "BranchPolicy",
    "Certificate",
    "Inconclusive",
    "LimitCycle",
    "Metric",
    "Partition",
    "PiecewiseMap",
    "PluginPiece",
    "RepairFailed",
    "RepairResult",
    "SpecError",
    "atom_diameter_bound",
    "basin_labels",
    "certify",
    "emit_certificate",
    "emit_map_spec",
    "extend_map",
    "hausdorff",
    "is_epsilon_perturbation",
    "iterate_orbit",
    "locate_cycle",
    "match_cycles",
    "parse_map_spec",
    "persistence_radius",
    "refine_atoms",
    "repair",
    "separation_line",
    "transition_graph",
    "validate_map",
    "validate_partition",
]
