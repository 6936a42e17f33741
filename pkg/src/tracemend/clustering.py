"""Clustering of correct attempts into representative-led clusters.

Attempts arrive one at a time.  If an existing representative matches the
newcomer, it joins that cluster; if instead the newcomer matches existing
representatives, it takes over their clusters (it is the more general
program); otherwise it starts its own cluster.  Afterwards: every
representative matches all of its members, and no two representatives match
in either direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .interp import DEFAULT_STEP_LIMIT, InputSet, Ok, run_all
from .matching import matches
from .model import Program


@dataclass(frozen=True)
class ProgramEntry:
    id: str
    program: Program
    source: str


@dataclass
class Clustering:
    reps: List[str] = field(default_factory=list)  # insertion order
    members: Dict[str, Set[str]] = field(default_factory=dict)
    programs: Dict[str, ProgramEntry] = field(default_factory=dict)

    def cluster_count(self) -> int:
        return len(self.reps)

    def member_count(self) -> int:
        return sum(len(m) for m in self.members.values())

    def rep_programs(self) -> List[ProgramEntry]:
        return [self.programs[r] for r in self.reps]

    def copy(self) -> "Clustering":
        return Clustering(
            reps=list(self.reps),
            members={k: set(v) for k, v in self.members.items()},
            programs=dict(self.programs),
        )


class CorpusError(Exception):
    """An attempt handed to the clusterer does not run cleanly; it is not a
    correct attempt and was misclassified upstream."""


def _require_runs_ok(entry: ProgramEntry, inputs: InputSet, step_limit: int):
    outcomes = run_all(entry.program, inputs, step_limit)
    bad = [o for o in outcomes if not isinstance(o, Ok)]
    if bad:
        raise CorpusError(
            f"attempt {entry.id!r} does not run cleanly on all inputs: {bad[0]}")


def add_attempt(c: Clustering, entry: ProgramEntry, inputs: InputSet,
                step_limit: int = DEFAULT_STEP_LIMIT) -> Clustering:
    """One clustering step; returns a new Clustering."""
    _require_runs_ok(entry, inputs, step_limit)
    out = c.copy()
    out.programs[entry.id] = entry

    # an existing representative absorbs the newcomer
    for rep in out.reps:
        if matches(out.programs[rep].program, entry.program, inputs, step_limit):
            out.members[rep].add(entry.id)
            return out

    # the newcomer absorbs every representative it matches
    absorbed = [
        rep for rep in out.reps
        if matches(entry.program, out.programs[rep].program, inputs, step_limit)
    ]
    new_members = {entry.id}
    for rep in absorbed:
        new_members |= out.members.pop(rep)
        out.reps.remove(rep)
    out.reps.append(entry.id)
    out.members[entry.id] = new_members
    return out


def cluster(correct: List[ProgramEntry], inputs: InputSet,
            step_limit: int = DEFAULT_STEP_LIMIT) -> Clustering:
    """Cluster pre-filtered correct attempts (order-dependent)."""
    c = Clustering()
    for entry in correct:
        c = add_attempt(c, entry, inputs, step_limit)
    return c


def audit_clustering(c: Clustering, inputs: InputSet,
                     step_limit: int = DEFAULT_STEP_LIMIT) -> List[str]:
    """Re-verify the clustering conditions by direct matching calls."""
    problems = []
    for rep in c.reps:
        rp = c.programs[rep].program
        for member in c.members[rep]:
            if matches(rp, c.programs[member].program, inputs, step_limit) is None:
                problems.append(f"representative {rep} does not match member {member}")
    for i, a in enumerate(c.reps):
        for b in c.reps[i + 1:]:
            pa, pb = c.programs[a].program, c.programs[b].program
            if matches(pa, pb, inputs, step_limit) is not None:
                problems.append(f"representative {a} matches representative {b}")
            if matches(pb, pa, inputs, step_limit) is not None:
                problems.append(f"representative {b} matches representative {a}")
    universe = set(c.programs)
    covered = set()
    for rep in c.reps:
        overlap = covered & c.members[rep]
        if overlap:
            problems.append(f"clusters overlap on {sorted(overlap)}")
        covered |= c.members[rep]
    if covered != universe:
        problems.append("clusters do not cover all attempts")
    for rep in c.reps:
        rep_vars = len(c.programs[rep].program.vars)
        for member in c.members[rep]:
            if rep_vars > len(c.programs[member].program.vars):
                problems.append(
                    f"representative {rep} has more variables than member {member}")
    return problems
