"""Repair of an incorrect attempt against a reference program.

The reference (a cluster representative) runs on the test inputs; the
attempt never runs.  For every (location, variable) of the reference the
algorithm gathers conditional matchings: either an attempt expression that
already computes the right values under some partial variable mapping
(cost 0), or a replacement by the reference expression translated under a
partial mapping (cost = tree edit distance).  Unmatched attempt variables
may be deleted at node-count cost.  A 0-1 ILP picks one conditional
matching per (location, variable) plus a globally consistent injective
variable mapping of minimal total cost.  If the chosen expressions demand
contradictory statement orders at one location, blocking constraints are
added and the ILP is re-solved.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Set, Tuple

from . import ilp
from .interp import (
    DEFAULT_STEP_LIMIT,
    Error,
    EvalError,
    InputSet,
    Ok,
    eval_expr,
    run_all,
)
from .matching import matches, structure_match
from .model import (
    Expr,
    Memory,
    OpApply,
    PrimedVarRef,
    Program,
    SPECIAL_VARS,
    UNDEF,
    VarRef,
    primed,
    rename_vars,
    values_equal,
    walk_expr,
)
from .treedist import delete_cost, insert_cost, tree_distance

STAR = "★"  # target marking the introduction of a new variable
DELETE = "-"  # left-side marking an attempt variable for deletion

DEFAULT_BUDGET_S = 60.0
FIRST_SOLVE_SHARE = 0.8  # share of the budget for collection + first solve
MAX_EXPR_VARS = 6  # beyond this, mapping enumeration is restricted


class RepairTimeout(Exception):
    pass


class RepairInternalError(Exception):
    pass


def fresh_name(spec_var: str) -> str:
    return f"$new_{spec_var.lstrip('$')}"


class _Deleted:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DELETED"


DELETED = _Deleted()


@dataclass(frozen=True)
class Candidate:
    """One conditional matching: spec_var can match impl_var provided the
    whole mapping extends rho, at the given cost."""

    kind: str  # "correct" | "modify" | "delete"
    spec_loc: Optional[int]
    spec_var: str  # DELETE for deletions
    impl_loc: int
    impl_var: str  # STAR for new-variable targets
    rho: tuple  # sorted (spec side, impl side) pairs, includes (spec_var, impl_var)
    cost: int
    replacement: Optional[Expr]  # None for cost-0 matchings and deletions

    def rho_dict(self) -> dict:
        return dict(self.rho)


@dataclass(frozen=True)
class Modification:
    impl_loc: int
    impl_var: str
    old_expr: Expr
    new_expr: object  # Expr or DELETED
    cost: int

    @property
    def is_deletion(self) -> bool:
        return self.new_expr is DELETED

    @property
    def inserts_statement(self) -> bool:
        """True when nothing was assigned here before: a brand-new statement
        (possibly for a brand-new variable)."""
        if self.is_deletion:
            return False
        return self.old_expr == VarRef(self.impl_var)


@dataclass(frozen=True)
class RepairResult:
    spec_id: str
    pi: dict  # spec var -> impl var or fresh name
    mods: tuple  # Modification, sorted by (impl_loc, impl_var)
    total_cost: int
    selected: tuple = field(compare=False, default=())  # selected Candidates
    conflict_rounds: int = field(compare=False, default=0)

    @property
    def reordered(self) -> bool:
        return self.conflict_rounds > 0

    @property
    def inserts(self) -> bool:
        return any(m.inserts_statement for m in self.mods)


# ---------------------------------------------------------------------------
# Conditional matchings


def translate_memory(m: Memory, rho: Dict[str, str]) -> Memory:
    """Rebind a reference memory to attempt names: for each rho(u1)=u2 the
    result binds u2 (and u2') to m(u1) (and m(u1'))."""
    out = {}
    for u1, u2 in rho.items():
        out[u2] = m.get(u1)
        out[primed(u2)] = m.get(primed(u1))
    return Memory(out)


def _allowed_targets(u: str, pool: Iterable[str], star_ok: bool) -> List[str]:
    """Targets a variable may map to: special variables only to themselves,
    everything else to non-special names (plus STAR when allowed)."""
    if u in SPECIAL_VARS:
        return [u] if u in pool or u in SPECIAL_VARS else []
    targets = [t for t in pool if t not in SPECIAL_VARS]
    if star_ok:
        targets.append(STAR)
    return targets


def _injective_maps(domain: List[str], allowed: Dict[str, List[str]],
                    budget_check) -> Iterable[Dict[str, str]]:
    """All injective maps (STAR may repeat) assigning each domain variable
    one of its allowed targets."""
    if not domain:
        yield {}
        return

    def rec(i: int, used: Set[str], acc: Dict[str, str]):
        budget_check()
        if i == len(domain):
            yield dict(acc)
            return
        u = domain[i]
        for t in allowed[u]:
            if t != STAR and t in used:
                continue
            acc[u] = t
            if t != STAR:
                used.add(t)
            yield from rec(i + 1, used, acc)
            if t != STAR:
                used.discard(t)
            del acc[u]

    yield from rec(0, set(), {})


def _expr_var_names(e: Expr) -> List[str]:
    seen = []
    for node in walk_expr(e):
        if isinstance(node, (VarRef, PrimedVarRef)) and node.name not in seen:
            seen.append(node.name)
    return sorted(seen)


class _Collector:
    def __init__(self, spec: Program, impl: Program, kappa: dict,
                 memories_at: Dict[int, List[Memory]], deadline: Optional[float]):
        self.spec = spec
        self.impl = impl
        self.kappa = kappa
        self.memories_at = memories_at
        self.deadline = deadline
        self._ticks = 0

    def budget_check(self):
        self._ticks += 1
        if self.deadline is not None and self._ticks % 512 == 0:
            if time.monotonic() > self.deadline:
                raise RepairTimeout("candidate collection exceeded the budget")

    def correct_matchings(self, l1: int, v1: str) -> List[Candidate]:
        """Attempt expressions that already compute v1's post values under
        some injective partial mapping, verified on every reference memory
        observed at l1."""
        memories = self.memories_at.get(l1, [])
        if not memories:
            return []
        l2 = self.kappa[l1]
        out = []
        spec_pool = list(self.spec.vars)
        for v2 in self.impl.vars:
            if (v1 in SPECIAL_VARS or v2 in SPECIAL_VARS) and v1 != v2:
                continue
            e2 = self.impl.label(l2, v2)
            domain = sorted(set(_expr_var_names(e2)) | {v2})
            allowed = {}
            feasible = True
            for u2 in domain:
                if u2 == v2:
                    allowed[u2] = [v1]
                else:
                    targets = _allowed_targets(u2, spec_pool, star_ok=False)
                    targets = [t for t in targets if t != v1] if u2 != v2 else targets
                    allowed[u2] = targets
                if not allowed[u2]:
                    feasible = False
                    break
            if not feasible:
                continue
            if len(domain) > MAX_EXPR_VARS:
                allowed = self._restrict(domain, allowed, l1, invert=True)
            for fwd in _injective_maps(domain, allowed, self.budget_check):
                rho = {u1: u2 for u2, u1 in fwd.items()}
                if self._verified(e2, rho, memories, v1):
                    out.append(Candidate(
                        kind="correct", spec_loc=l1, spec_var=v1,
                        impl_loc=l2, impl_var=v2,
                        rho=tuple(sorted(rho.items())), cost=0, replacement=None,
                    ))
        return out

    def _verified(self, e2: Expr, rho: Dict[str, str], memories, v1: str) -> bool:
        pv1 = primed(v1)
        for m in memories:
            want = m.get(pv1)
            try:
                got = eval_expr(e2, translate_memory(m, rho))
            except EvalError:
                return False
            if not values_equal(got, want):
                return False
        return True

    def modification_matchings(self, l1: int, v1: str,
                               zero_pairs: Set[Tuple[str, str]]) -> List[Candidate]:
        """Replacements of an attempt expression by the reference expression
        under an injective partial mapping into attempt variables or STAR."""
        e1 = self.spec.label(l1, v1)
        l2 = self.kappa[l1]
        e1_default = e1 == VarRef(v1)
        domain = sorted(set(_expr_var_names(e1)) | {v1})
        impl_pool = list(self.impl.vars)
        params = set(self.spec.params)
        out = []
        # Parameters receive their values from the input binding, so a fresh
        # variable can never stand in for one.
        if v1 in SPECIAL_VARS:
            targets_v1 = [v1]
        else:
            targets_v1 = [v for v in impl_pool if v not in SPECIAL_VARS]
            if v1 not in params:
                targets_v1.append(STAR)
        for v2 in targets_v1:
            allowed = {}
            for u1 in domain:
                if u1 == v1:
                    allowed[u1] = [v2]
                elif u1 in SPECIAL_VARS:
                    allowed[u1] = [u1]
                else:
                    pool = [t for t in impl_pool
                            if t not in SPECIAL_VARS and t != v2]
                    if u1 not in params:
                        pool = pool + [STAR]
                    allowed[u1] = pool
            if len(domain) > MAX_EXPR_VARS:
                allowed = self._restrict(domain, allowed, l1, invert=False,
                                         zero_pairs=zero_pairs)
            for rho in _injective_maps(domain, allowed, self.budget_check):
                subs = {
                    u1: (fresh_name(u1) if t == STAR else t)
                    for u1, t in rho.items()
                }
                replacement = rename_vars(e1, subs)
                if v2 == STAR:
                    old = VarRef(fresh_name(v1))
                    if e1_default:
                        # a new variable that is never assigned: no statement
                        # is inserted, nothing to pay
                        cost = 0
                    else:
                        cost = insert_cost(replacement)
                else:
                    old = self.impl.label(l2, v2)
                    cost = tree_distance(old, replacement)
                out.append(Candidate(
                    kind="modify", spec_loc=l1, spec_var=v1,
                    impl_loc=l2, impl_var=v2,
                    rho=tuple(sorted(rho.items())), cost=cost,
                    replacement=None if cost == 0 else replacement,
                ))
        return out

    def _restrict(self, domain, allowed, l1, invert, zero_pairs=None):
        """Large expressions: keep only mappings consistent with the cost-0
        matchings already found at this location (plus STAR/self targets)."""
        pairs = zero_pairs if zero_pairs is not None else set()
        narrowed = {}
        for u, targets in allowed.items():
            if len(targets) <= 1:
                narrowed[u] = targets
                continue
            if invert:
                keep = {a for (a, b) in pairs if b == u}
                narrowed[u] = [t for t in targets if t in keep] or targets[:1]
            else:
                keep = {b for (a, b) in pairs if a == u}
                narrowed[u] = [t for t in targets if t in keep or t == STAR]
        return narrowed

    def delete_matchings(self, l2: int) -> List[Candidate]:
        """Deletion of an attempt variable's assignment at one location;
        identity labels have nothing to delete."""
        out = []
        for v2 in self.impl.vars:
            if v2 in SPECIAL_VARS:
                continue
            e2 = self.impl.label(l2, v2)
            if e2 == VarRef(v2):
                continue
            out.append(Candidate(
                kind="delete", spec_loc=None, spec_var=DELETE,
                impl_loc=l2, impl_var=v2,
                rho=((DELETE, v2),), cost=delete_cost(e2), replacement=None,
            ))
        return out


def cond_matchings(spec: Program, impl: Program, kappa: dict,
                   traces, l1: int, v1: str,
                   deadline: Optional[float] = None) -> List[Candidate]:
    """All conditional matchings for one reference (location, variable)."""
    memories_at = collect_memories(traces)
    collector = _Collector(spec, impl, kappa, memories_at, deadline)
    correct = collector.correct_matchings(l1, v1)
    zero_pairs = {pair for c in correct for pair in c.rho}
    mods = collector.modification_matchings(l1, v1, zero_pairs)
    return _dedup(correct + mods)


def delete_matchings(impl: Program, l2: int) -> List[Candidate]:
    collector = _Collector(impl, impl, {}, {}, None)
    return collector.delete_matchings(l2)


def collect_memories(traces) -> Dict[int, List[Memory]]:
    """Reference memories grouped by location, deduplicated by value."""
    out: Dict[int, List[Memory]] = {}
    seen: Dict[int, set] = {}
    for trace in traces:
        for loc, mem in trace:
            key = mem.freeze()
            bucket = seen.setdefault(loc, set())
            if key in bucket:
                continue
            bucket.add(key)
            out.setdefault(loc, []).append(mem)
    return out


def _dedup(cands: List[Candidate]) -> List[Candidate]:
    seen = set()
    out = []
    for c in cands:
        key = (c.kind, c.spec_loc, c.spec_var, c.impl_var, c.rho, c.cost,
               c.replacement)
        if key in seen:
            continue
        seen.add(key)
        out.append(c)
    return out


# ---------------------------------------------------------------------------
# ILP encoding / decoding


def _pair_name(v1: str, v2: str) -> str:
    return f"p[{v1}|{v2}]"


@dataclass
class EncodedProblem:
    model: ilp.IlpModel
    candidates: List[Candidate]
    groups: Dict[Tuple[int, str], List[int]]
    spec_vars: tuple
    impl_vars: tuple


def encode(candidates_by_group: Dict[Tuple[int, str], List[Candidate]],
           deletions: List[Candidate],
           spec_vars, impl_vars) -> EncodedProblem:
    """Build the 0-1 program: selection variables per candidate, pairing
    variables per (spec side, attempt side) variable pair."""
    model = ilp.IlpModel(sense="min")
    left = list(spec_vars) + [DELETE]
    right = list(impl_vars) + [STAR]
    for v1 in left:
        for v2 in right:
            model.add_var(_pair_name(v1, v2))

    candidates: List[Candidate] = []
    groups: Dict[Tuple[int, str], List[int]] = {}
    for key in sorted(candidates_by_group, key=lambda k: (k[0], k[1])):
        group = []
        for cand in candidates_by_group[key]:
            idx = len(candidates)
            candidates.append(cand)
            model.add_var(f"m{idx}", obj_coef=cand.cost)
            group.append(idx)
        if not group:
            raise RepairInternalError(f"empty candidate group for {key}")
        groups[key] = group
    for cand in deletions:
        idx = len(candidates)
        candidates.append(cand)
        model.add_var(f"m{idx}", obj_coef=cand.cost)

    # (1) every reference variable matches exactly one target
    for v1 in spec_vars:
        model.add_eq({_pair_name(v1, v2): 1 for v2 in right}, 1)
    # (2) special variables match themselves
    for sv in SPECIAL_VARS:
        if sv in spec_vars and sv in impl_vars:
            model.add_eq({_pair_name(sv, sv): 1}, 1)
    # (3) every attempt variable is matched or deleted
    for v2 in impl_vars:
        model.add_eq({_pair_name(v1, v2): 1 for v1 in left}, 1)
    # (4) exactly one conditional matching per (location, variable)
    for key, group in groups.items():
        model.add_eq({f"m{idx}": 1 for idx in group}, 1)
    # (5) a selected matching implies every pair of its partial mapping
    for idx, cand in enumerate(candidates):
        for u1, u2 in cand.rho:
            model.add_ge({f"m{idx}": -1, _pair_name(u1, u2): 1}, 0)

    return EncodedProblem(model, candidates, groups, tuple(spec_vars),
                          tuple(impl_vars))


def decode(assignment: ilp.Assignment, encoded: EncodedProblem,
           kappa: dict, impl: Program, spec_id: str) -> RepairResult:
    """Read the chosen mapping and modifications out of an ILP solution."""
    pi = {}
    for v1 in encoded.spec_vars:
        for v2 in list(encoded.impl_vars) + [STAR]:
            if assignment.values.get(_pair_name(v1, v2)):
                pi[v1] = fresh_name(v1) if v2 == STAR else v2
                break
        else:
            raise RepairInternalError(f"no target chosen for {v1}")
    selected = [
        encoded.candidates[idx]
        for idx in range(len(encoded.candidates))
        if assignment.values.get(f"m{idx}")
    ]
    mods = []
    for cand in selected:
        if cand.kind == "modify" and cand.cost > 0:
            target = (fresh_name(cand.spec_var) if cand.impl_var == STAR
                      else cand.impl_var)
            old = (VarRef(target) if cand.impl_var == STAR
                   else impl.label(cand.impl_loc, cand.impl_var))
            mods.append(Modification(cand.impl_loc, target, old,
                                     cand.replacement, cand.cost))
        elif cand.kind == "delete":
            mods.append(Modification(
                cand.impl_loc, cand.impl_var,
                impl.label(cand.impl_loc, cand.impl_var), DELETED, cand.cost))
    mods.sort(key=lambda m: (m.impl_loc, m.impl_var))
    total = sum(m.cost for m in mods)
    if total != assignment.objective_value:
        raise RepairInternalError(
            f"objective {assignment.objective_value} != modification cost {total}")
    return RepairResult(spec_id=spec_id, pi=pi, mods=tuple(mods),
                        total_cost=total, selected=tuple(selected))


# ---------------------------------------------------------------------------
# Statement order


def variable_order(var: str, e: Expr) -> Set[Tuple[str, str]]:
    """Pairs (a, b) meaning `a must be assigned before b` implied by the
    assignment var := e: unprimed reads put var first, primed reads put the
    read variable first."""
    out = set()
    for node in walk_expr(e):
        if isinstance(node, VarRef):
            out.add((var, node.name))
        elif isinstance(node, PrimedVarRef):
            out.add((node.name, var))
    return out


def _candidate_order(cand: Candidate, impl: Program) -> Set[Tuple[str, str]]:
    if cand.kind == "delete":
        return set()
    target = fresh_name(cand.spec_var) if cand.impl_var == STAR else cand.impl_var
    if cand.replacement is not None:
        e = cand.replacement
    elif cand.impl_var == STAR:
        e = VarRef(target)
    else:
        e = impl.label(cand.impl_loc, cand.impl_var)
    return variable_order(target, e)


def check_order_conflicts(selected: Iterable[Candidate],
                          impl: Program) -> List[Tuple[Candidate, Candidate]]:
    """Pairs of selected candidates at one location demanding opposite
    assignment orders for two distinct variables."""
    by_loc: Dict[int, List[Tuple[Candidate, Set[Tuple[str, str]]]]] = {}
    for cand in selected:
        if cand.kind == "delete":
            continue
        by_loc.setdefault(cand.impl_loc, []).append(
            (cand, _candidate_order(cand, impl)))
    conflicts = []
    for loc, entries in sorted(by_loc.items()):
        for (c1, o1), (c2, o2) in itertools.combinations(entries, 2):
            if any(a != b and (b, a) in o2 for (a, b) in o1):
                conflicts.append((c1, c2))
    return conflicts


def order_cycle_groups(selected: Iterable[Candidate],
                       impl: Program) -> List[List[Candidate]]:
    """Candidate sets whose combined orders are cyclic at one location.
    Pairwise conflicts are the two-cycles; longer cycles (which equally have
    no valid statement order) are detected through strongly connected
    components."""
    by_loc: Dict[int, List[Tuple[Candidate, Set[Tuple[str, str]]]]] = {}
    for cand in selected:
        if cand.kind == "delete":
            continue
        by_loc.setdefault(cand.impl_loc, []).append(
            (cand, _candidate_order(cand, impl)))
    out = []
    for loc, entries in sorted(by_loc.items()):
        edges: Dict[str, Set[str]] = {}
        support: Dict[Tuple[str, str], Set[int]] = {}
        for i, (cand, order) in enumerate(entries):
            for a, b in order:
                if a == b:
                    continue
                edges.setdefault(a, set()).add(b)
                edges.setdefault(b, set())
                support.setdefault((a, b), set()).add(i)
        for comp in _tarjan_sccs(edges):
            comp_set = set(comp)
            if len(comp_set) < 2:
                continue
            members = set()
            for (a, b), idxs in support.items():
                if a in comp_set and b in comp_set:
                    members |= idxs
            out.append([entries[i][0] for i in sorted(members)])
    return out


def _tarjan_sccs(edges: Dict[str, Set[str]]) -> List[List[str]]:
    index: Dict[str, int] = {}
    low: Dict[str, int] = {}
    on_stack: Set[str] = set()
    stack: List[str] = []
    counter = itertools.count()
    sccs: List[List[str]] = []

    def strongconnect(v):
        index[v] = low[v] = next(counter)
        stack.append(v)
        on_stack.add(v)
        for w in sorted(edges.get(v, ())):
            if w not in index:
                strongconnect(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            sccs.append(comp)

    for v in sorted(edges):
        if v not in index:
            strongconnect(v)
    return sccs


# ---------------------------------------------------------------------------
# Top level


def repair_one(spec: Program, impl: Program, inputs: InputSet,
               budget: float = DEFAULT_BUDGET_S, spec_id: str = "spec",
               step_limit: int = DEFAULT_STEP_LIMIT) -> Optional[RepairResult]:
    """Minimal repair of impl against one reference; None when the control
    flow does not line up.  Raises RepairTimeout when the budget runs out."""
    start = time.monotonic()
    deadline = start + budget
    first_deadline = start + budget * FIRST_SOLVE_SHARE

    if sorted(spec.params) != sorted(impl.params):
        return None  # inputs bind parameters by name; signatures must agree
    kappa = structure_match(spec, impl)
    if kappa is None:
        return None
    outcomes = run_all(spec, inputs, step_limit)
    bad = [o for o in outcomes if not isinstance(o, Ok)]
    if bad:
        raise RepairInternalError(
            f"reference {spec_id!r} does not run cleanly: {bad[0]}")

    # An attempt the reference already matches needs no modifications; the
    # witness mapping is the answer.  (The conditional-matching route cannot
    # always certify this for free: helper variables of the attempt may have
    # no reference counterpart to map their expressions onto.)
    witness = matches(spec, impl, inputs, step_limit)
    if witness is not None:
        return RepairResult(spec_id=spec_id, pi=dict(witness.pi), mods=(),
                            total_cost=0)

    traces = [o.trace for o in outcomes]
    memories_at = collect_memories(traces)

    collector = _Collector(spec, impl, kappa, memories_at, first_deadline)
    groups: Dict[Tuple[int, str], List[Candidate]] = {}
    for l1 in spec.locations:
        zero_pairs: Set[Tuple[str, str]] = set()
        per_var_correct = {}
        for v1 in spec.vars:
            correct = collector.correct_matchings(l1, v1)
            per_var_correct[v1] = correct
            zero_pairs |= {pair for c in correct for pair in c.rho}
        for v1 in spec.vars:
            mods = collector.modification_matchings(l1, v1, zero_pairs)
            groups[(l1, v1)] = _dedup(per_var_correct[v1] + mods)
    deletions = []
    for l1 in spec.locations:
        deletions.extend(collector.delete_matchings(kappa[l1]))

    encoded = encode(groups, deletions, spec.vars, impl.vars)
    model = encoded.model
    index_of = {id(c): i for i, c in enumerate(encoded.candidates)}

    rounds = 0
    while True:
        solve_deadline = first_deadline if rounds == 0 else deadline
        remaining = solve_deadline - time.monotonic()
        if remaining <= 0:
            raise RepairTimeout(f"repair against {spec_id!r} ran out of budget")
        res = ilp.solve(model, time_budget=remaining)
        if res.status == ilp.BUDGET_EXCEEDED:
            raise RepairTimeout(f"repair against {spec_id!r} ran out of budget")
        if res.status == ilp.INFEASIBLE:
            raise RepairInternalError(
                "selection model infeasible; the full-replacement fallback "
                "should always exist")
        result = decode(res.assignment, encoded, kappa, impl, spec_id)
        cycle_groups = order_cycle_groups(result.selected, impl)
        if not cycle_groups:
            result = _delete_erroring_leftovers(result, impl, inputs,
                                                step_limit, deadline)
            return replace(result, conflict_rounds=rounds)
        for group in cycle_groups:
            if len(group) == 2:
                a, b = (index_of[id(c)] for c in group)
                model = ilp.add_constraint(
                    model,
                    ilp.Constraint(((f"m{a}", -1), (f"m{b}", -1)), ilp.GE, -1))
            else:
                coefs = tuple((f"m{index_of[id(c)]}", -1) for c in group)
                model = ilp.add_constraint(
                    model, ilp.Constraint(coefs, ilp.GE, -(len(group) - 1)))
        rounds += 1


def _delete_erroring_leftovers(result: RepairResult, impl: Program,
                               inputs: InputSet, step_limit: int,
                               deadline: float) -> RepairResult:
    """Attempt variables mapped to nothing keep their assignments; when one
    of those assignments raises on the test inputs it is removed from the
    repaired program (as a deletion modification at node-count cost)."""
    matched = set(result.pi.values())
    mods = list(result.mods)
    while True:
        if time.monotonic() > deadline:
            raise RepairTimeout("cleanup of unmatched assignments ran out of budget")
        repaired = apply_repair(impl, replace(
            result, mods=tuple(mods),
            total_cost=sum(m.cost for m in mods)))
        outcomes = run_all(repaired, inputs, step_limit)
        errors = [o for o in outcomes if isinstance(o, Error)]
        if not errors:
            break
        err = errors[0]
        old = repaired.label(err.loc, err.var) if err.var else None
        if (err.var is None or err.var in matched
                or old == VarRef(err.var)):
            raise RepairInternalError(
                f"repaired program fails outside unmatched assignments: "
                f"{err.message}")
        mods.append(Modification(err.loc, err.var, old, DELETED,
                                 delete_cost(old)))
    mods.sort(key=lambda m: (m.impl_loc, m.impl_var))
    return replace(result, mods=tuple(mods),
                   total_cost=sum(m.cost for m in mods))


@dataclass(frozen=True)
class BestRepair:
    result: Optional[RepairResult]
    timed_out: bool = False

    @property
    def found(self) -> bool:
        return self.result is not None


def repair_best(specs, impl: Program, inputs: InputSet,
                budget: float = DEFAULT_BUDGET_S,
                step_limit: int = DEFAULT_STEP_LIMIT) -> BestRepair:
    """Best repair across all references: minimal total cost, ties broken by
    fewer modifications, then by reference id.  The budget is a global
    wall-clock deadline."""
    deadline = time.monotonic() + budget
    best: Optional[RepairResult] = None
    timed_out = False
    for spec_id, spec in specs:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            timed_out = True
            break
        try:
            result = repair_one(spec, impl, inputs, budget=remaining,
                                spec_id=spec_id, step_limit=step_limit)
        except RepairTimeout:
            timed_out = True
            continue
        if result is None:
            continue
        if best is None or _repair_rank(result) < _repair_rank(best):
            best = result
    return BestRepair(result=best, timed_out=timed_out and best is None)


def _repair_rank(r: RepairResult):
    return (r.total_cost, len(r.mods), r.spec_id)


def apply_repair(impl: Program, result: RepairResult) -> Program:
    """The repaired program: labels overridden per modification, deletions
    reset to identity, fresh variables appended; control flow unchanged."""
    new_vars = list(impl.vars)
    for v1 in sorted(result.pi):
        target = result.pi[v1]
        if target not in new_vars:
            new_vars.append(target)
    labels = dict(impl.labels)
    stmt_lines = dict(impl.stmt_lines)
    for mod in result.mods:
        key = (mod.impl_loc, mod.impl_var)
        if mod.is_deletion:
            labels.pop(key, None)
            stmt_lines.pop(key, None)
        else:
            labels[key] = mod.new_expr
            if key not in stmt_lines:
                span = impl.source_spans.get(mod.impl_loc)
                if span:
                    stmt_lines[key] = span[1]
    return Program(
        name=impl.name,
        locations=impl.locations,
        init=impl.init,
        vars=tuple(new_vars),
        params=impl.params,
        labels=labels,
        succ=dict(impl.succ),
        source_spans=dict(impl.source_spans),
        stmt_lines=stmt_lines,
    )
