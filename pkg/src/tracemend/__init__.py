"""Clustering and repair of introductory programming attempts.

Correct attempts are clustered by dynamic trace matching; each cluster's
representative serves as a reference program.  Incorrect attempts are
repaired by minimal expression modifications borrowed from a reference,
selected by an exact 0-1 integer program, and rendered as line-anchored
feedback.
"""

from .model import Program, Memory, Trace, UNDEF, values_equal
from .interp import InputSet, run, run_all, Ok, Error, StepLimit
from .matching import matches, structure_match, MatchWitness
from .clustering import cluster, add_attempt, Clustering, ProgramEntry
from .repair import (
    repair_one,
    repair_best,
    apply_repair,
    RepairResult,
    Modification,
    BestRepair,
)
from .feedback import render, Feedback, FeedbackItem

__all__ = [
    "Program", "Memory", "Trace", "UNDEF", "values_equal",
    "InputSet", "run", "run_all", "Ok", "Error", "StepLimit",
    "matches", "structure_match", "MatchWitness",
    "cluster", "add_attempt", "Clustering", "ProgramEntry",
    "repair_one", "repair_best", "apply_repair", "RepairResult",
    "Modification", "BestRepair",
    "render", "Feedback", "FeedbackItem",
]

__version__ = "0.1.0"
