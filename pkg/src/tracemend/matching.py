"""Deciding whether one program matches another on a set of inputs.

A match needs (1) a location bijection kappa commuting with both successor
branches, and (2) an injective variable mapping pi, identity on the special
variables, such that mapped variables take equal post values at every trace
step on every input.  Undefined values on the left tolerate anything; a
defined left value requires equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .interp import DEFAULT_STEP_LIMIT, InputSet, Ok, run_all
from .model import END, Memory, Program, SPECIAL_VARS, Trace, UNDEF, primed, values_equal


@dataclass(frozen=True)
class MatchWitness:
    kappa: dict  # location -> location
    pi: dict  # variable -> variable
    used_undef_tolerance: bool = field(default=False, compare=False)


def structure_match(p: Program, q: Program) -> Optional[dict]:
    """The unique location bijection obtained by propagating from the initial
    locations along both successor branches; None when shapes differ."""
    if len(p.locations) != len(q.locations):
        return None
    kappa = {p.init: q.init}
    stack = [p.init]
    while stack:
        l1 = stack.pop()
        l2 = kappa[l1]
        for b in (True, False):
            s1 = p.succ[(l1, b)]
            s2 = q.succ[(l2, b)]
            if (s1 is END) != (s2 is END):
                return None
            if s1 is END:
                continue
            if s1 in kappa:
                if kappa[s1] != s2:
                    return None
            else:
                kappa[s1] = s2
                stack.append(s1)
    if len(kappa) != len(p.locations):
        return None
    if len(set(kappa.values())) != len(kappa):
        return None
    return kappa


def var_matches(t1: Trace, t2: Trace, v1: str, v2: str) -> bool:
    """True when v1's post value is undefined or equals v2's post value at
    every step of the paired traces."""
    if len(t1) != len(t2):
        return False
    p1, p2 = primed(v1), primed(v2)
    for (_, m1), (_, m2) in zip(t1, t2):
        a = m1.get(p1)
        if a is UNDEF:
            continue
        if not values_equal(a, m2.get(p2)):
            return False
    return True


def _var_match_uses_undef(t1: Trace, v1: str) -> bool:
    p1 = primed(v1)
    return any(m1.get(p1) is UNDEF for _, m1 in t1)


def find_full_mapping(pairs: Set[Tuple[str, str]], spec_vars, impl_vars) -> Optional[dict]:
    """Injective mapping covering every spec variable, drawn from the given
    potential matches, with special variables fixed to themselves.  Found by
    bipartite maximum matching with deterministic (sorted) iteration."""
    pi = {}
    for sv in SPECIAL_VARS:
        if sv in spec_vars:
            if (sv, sv) not in pairs:
                return None
            pi[sv] = sv
    left = sorted(v for v in spec_vars if v not in SPECIAL_VARS)
    taken = set(pi.values())
    adjacency = {
        v1: sorted(
            v2 for (a, v2) in pairs
            if a == v1 and v2 not in SPECIAL_VARS and v2 not in taken
        )
        for v1 in left
    }
    match_of: Dict[str, str] = {}  # impl var -> spec var

    def augment(v1: str, seen: set) -> bool:
        for v2 in adjacency[v1]:
            if v2 in seen:
                continue
            seen.add(v2)
            if v2 not in match_of or augment(match_of[v2], seen):
                match_of[v2] = v1
                return True
        return False

    for v1 in left:
        if not augment(v1, set()):
            return None
    for v2, v1 in match_of.items():
        pi[v1] = v2
    return pi


def matches(p: Program, q: Program, inputs: InputSet,
            step_limit: int = DEFAULT_STEP_LIMIT) -> Optional[MatchWitness]:
    """Witness that p matches q on the inputs, or None.

    Both programs must run to completion on every input; traces must follow
    kappa step for step (equal $cond decisions force this anyway), and every
    p variable needs a distinct q partner with equal post values throughout.
    """
    kappa = structure_match(p, q)
    if kappa is None:
        return None
    runs_p = run_all(p, inputs, step_limit)
    if not all(isinstance(r, Ok) for r in runs_p):
        return None
    runs_q = run_all(q, inputs, step_limit)
    if not all(isinstance(r, Ok) for r in runs_q):
        return None
    trace_pairs: List[Tuple[Trace, Trace]] = []
    for rp, rq in zip(runs_p, runs_q):
        t1, t2 = rp.trace, rq.trace
        if len(t1) != len(t2):
            return None
        if any(kappa[l1] != l2 for (l1, _), (l2, _) in zip(t1, t2)):
            return None
        trace_pairs.append((t1, t2))

    pairs: Set[Tuple[str, str]] = set()
    candidates = [(sv, sv) for sv in SPECIAL_VARS]
    candidates += [
        (v1, v2)
        for v1 in p.non_special_vars()
        for v2 in q.non_special_vars()
    ]
    for v1, v2 in candidates:
        if all(var_matches(t1, t2, v1, v2) for t1, t2 in trace_pairs):
            pairs.add((v1, v2))

    pi = find_full_mapping(pairs, p.vars, q.vars)
    if pi is None:
        return None
    used_undef = any(
        _var_match_uses_undef(t1, v1)
        for v1 in p.vars
        for t1, _ in trace_pairs
    )
    return MatchWitness(kappa, pi, used_undef_tolerance=used_undef)


def potential_matches(p: Program, q: Program, inputs: InputSet,
                      step_limit: int = DEFAULT_STEP_LIMIT) -> Optional[Set[Tuple[str, str]]]:
    """The set of per-variable potential matches (step (1) of the matching
    procedure), or None when structure or runs rule a match out."""
    kappa = structure_match(p, q)
    if kappa is None:
        return None
    runs_p = run_all(p, inputs, step_limit)
    runs_q = run_all(q, inputs, step_limit)
    if not all(isinstance(r, Ok) for r in runs_p + runs_q):
        return None
    out: Set[Tuple[str, str]] = set()
    trace_pairs = []
    for rp, rq in zip(runs_p, runs_q):
        if len(rp.trace) != len(rq.trace):
            return None
        trace_pairs.append((rp.trace, rq.trace))
    for v1 in p.vars:
        for v2 in q.vars:
            if all(var_matches(t1, t2, v1, v2) for t1, t2 in trace_pairs):
                out.add((v1, v2))
    return out
