"""Model repair for CTL and ATL via boolean satisfiability.

A total Kripke structure (or turn-based game) that violates a temporal
formula is repaired by deleting transitions: the repair problem is
encoded as a propositional formula whose models are exactly the
repairs, and a satisfying assignment is decoded back into a structure.
"""

from .checker import check_atl, check_ctl
from .engine import (
    Failure, RepairOptions, Repaired, Unchanged, additive_repair, brute_force_repair,
    compile_instance, random_model, reduce_3sat, repair_atl, repair_ctl,
)
from .formula import parse_atl, parse_ctl
from .kripke import GameStructure, KripkeStructure, load_structure, parse_structure

__all__ = [
    "Failure", "GameStructure", "KripkeStructure", "RepairOptions", "Repaired", "Unchanged",
    "additive_repair", "brute_force_repair", "check_atl", "check_ctl", "compile_instance",
    "load_structure", "parse_atl", "parse_ctl", "parse_structure", "random_model", "reduce_3sat",
    "repair_atl", "repair_ctl",
]
