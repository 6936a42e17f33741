"""Exact zero-one integer linear programming.

Models carry binary variables, linear constraints over {>=, =}, and a
min/max objective.  ``solve`` runs depth-first branch and bound with
incremental constraint propagation; ``brute_force`` is the enumeration
oracle used by the tests.  Both use the same deterministic tie-break: among
optimal assignments, the lexicographically smallest under sorted variable
names.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, List, Optional, Tuple

GE = "ge"
EQ = "eq"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
BUDGET_EXCEEDED = "budget_exceeded"

BRUTE_FORCE_MAX_VARS = 20


class IlpError(Exception):
    pass


@dataclass(frozen=True)
class Constraint:
    coefs: tuple  # ((var, coef), ...)
    rel: str  # GE or EQ
    rhs: int

    def render(self) -> str:
        lhs = " + ".join(f"{c}*{v}" for v, c in self.coefs) or "0"
        op = ">=" if self.rel == GE else "="
        return f"{lhs} {op} {self.rhs}"


@dataclass
class IlpModel:
    sense: str = "min"
    variables: List[str] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective: Dict[str, int] = field(default_factory=dict)
    _index: Dict[str, int] = field(default_factory=dict)

    def add_var(self, name: str, obj_coef: int = 0) -> str:
        if name in self._index:
            raise IlpError(f"duplicate variable {name}")
        self._index[name] = len(self.variables)
        self.variables.append(name)
        if obj_coef:
            self.objective[name] = obj_coef
        return name

    def _check_known(self, coefs: Dict[str, int]):
        for v in coefs:
            if v not in self._index:
                raise IlpError(f"unknown variable {v}")

    def add_eq(self, coefs: Dict[str, int], rhs: int):
        self._check_known(coefs)
        self.constraints.append(Constraint(tuple(sorted(coefs.items())), EQ, rhs))

    def add_ge(self, coefs: Dict[str, int], rhs: int):
        self._check_known(coefs)
        self.constraints.append(Constraint(tuple(sorted(coefs.items())), GE, rhs))

    def add_le(self, coefs: Dict[str, int], rhs: int):
        # <= is normalized to >= by negation; the constraint grammar has only {>=, =}
        self.add_ge({v: -c for v, c in coefs.items()}, -rhs)

    def copy(self) -> "IlpModel":
        m = IlpModel(sense=self.sense)
        m.variables = list(self.variables)
        m.constraints = list(self.constraints)
        m.objective = dict(self.objective)
        m._index = dict(self._index)
        return m

    def dump_lp(self) -> str:
        """Debug dump in an LP-style text format, one constraint per line."""
        obj = " + ".join(
            f"{c}*{v}" for v, c in sorted(self.objective.items())
        ) or "0"
        lines = [f"{self.sense} {obj}", "subject to:"]
        lines.extend("  " + c.render() for c in self.constraints)
        lines.append("binary: " + " ".join(sorted(self.variables)))
        return "\n".join(lines)


def add_constraint(model: IlpModel, constraint: Constraint) -> IlpModel:
    """New model with the constraint appended (the incremental re-solve step)."""
    out = model.copy()
    out._check_known(dict(constraint.coefs))
    out.constraints.append(constraint)
    return out


@dataclass(frozen=True)
class Assignment:
    values: dict
    objective_value: int

    def __getitem__(self, var: str) -> int:
        return self.values[var]


@dataclass(frozen=True)
class IlpResult:
    status: str
    assignment: Optional[Assignment] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _satisfies(constraint: Constraint, values: dict) -> bool:
    lhs = sum(c * values[v] for v, c in constraint.coefs)
    return lhs >= constraint.rhs if constraint.rel == GE else lhs == constraint.rhs


def check_assignment(model: IlpModel, values: dict) -> bool:
    return all(_satisfies(c, values) for c in model.constraints)


def _objective_value(model: IlpModel, values: dict) -> int:
    return sum(c * values[v] for v, c in model.objective.items())


def brute_force(model: IlpModel) -> IlpResult:
    """Exhaustive enumeration oracle; guards against models too large to
    enumerate."""
    names = sorted(model.variables)
    if len(names) > BRUTE_FORCE_MAX_VARS:
        raise IlpError(
            f"brute_force limited to {BRUTE_FORCE_MAX_VARS} variables, "
            f"got {len(names)}"
        )
    sign = 1 if model.sense == "min" else -1
    best = None
    best_obj = None
    for bits in product((0, 1), repeat=len(names)):
        values = dict(zip(names, bits))
        if not check_assignment(model, values):
            continue
        obj = _objective_value(model, values)
        if best is None or sign * obj < sign * best_obj:
            best, best_obj = values, obj
    if best is None:
        return IlpResult(INFEASIBLE)
    return IlpResult(OPTIMAL, Assignment(best, best_obj))


class _Budget(Exception):
    pass


class _Searcher:
    """Branch-and-bound state with incremental propagation and undo trail."""

    def __init__(self, model: IlpModel, deadline: Optional[float]):
        self.names = list(model.variables)
        self.index = {n: i for i, n in enumerate(self.names)}
        n = len(self.names)
        self.sign = 1 if model.sense == "min" else -1
        self.obj = [0] * n
        for v, c in model.objective.items():
            self.obj[self.index[v]] = self.sign * c
        self.cons = []
        self.var_cons: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
        for c in model.constraints:
            ci = len(self.cons)
            terms = [(self.index[v], coef) for v, coef in c.coefs]
            fixed = 0
            min_rem = sum(min(0, coef) for _, coef in terms)
            max_rem = sum(max(0, coef) for _, coef in terms)
            self.cons.append(
                [terms, c.rel, c.rhs, fixed, min_rem, max_rem]
            )
            for vi, coef in terms:
                self.var_cons[vi].append((ci, coef))
        self.val = [-1] * n
        self.trail: List[int] = []
        self.obj_fixed = 0
        self.deadline = deadline
        self.nodes = 0
        self._queue: List[int] = []
        self._queued = [False] * len(self.cons)
        # Exactly-one groups over unit coefficients: they drive both the
        # additive lower bound and the branching; each variable belongs to
        # at most one bound group.
        self.group_of = [-1] * n
        self.groups: List[List[int]] = []
        for terms, rel, rhs, *_ in self.cons:
            if rel != EQ or rhs != 1:
                continue
            if any(coef != 1 for _, coef in terms):
                continue
            if any(self.group_of[vi] != -1 for vi, _ in terms):
                continue
            gid = len(self.groups)
            self.groups.append([vi for vi, _ in terms])
            for vi, _ in terms:
                self.group_of[vi] = gid
        self.group_sat = [False] * len(self.groups)

    # -- assignment bookkeeping

    def _tick(self):
        self.nodes += 1
        if self.deadline is not None and self.nodes % 256 == 0:
            if time.monotonic() > self.deadline:
                raise _Budget()

    def assign(self, vi: int, b: int) -> bool:
        """Fix variable vi to b; returns False when some constraint becomes
        unsatisfiable."""
        if self.val[vi] != -1:
            return self.val[vi] == b
        self.val[vi] = b
        self.trail.append(vi)
        self.obj_fixed += self.obj[vi] * b
        gid = self.group_of[vi]
        if gid != -1 and b == 1:
            self.group_sat[gid] = True
        ok = True
        for ci, coef in self.var_cons[vi]:
            con = self.cons[ci]
            con[3] += coef * b
            if coef > 0:
                con[5] -= coef
            else:
                con[4] -= coef
            lo = con[3] + con[4]
            hi = con[3] + con[5]
            if con[1] == GE:
                if hi < con[2]:
                    ok = False
            else:
                if hi < con[2] or lo > con[2]:
                    ok = False
            if not self._queued[ci]:
                self._queued[ci] = True
                self._queue.append(ci)
        return ok

    def undo_to(self, mark: int):
        while len(self.trail) > mark:
            vi = self.trail.pop()
            b = self.val[vi]
            self.val[vi] = -1
            self.obj_fixed -= self.obj[vi] * b
            gid = self.group_of[vi]
            if gid != -1 and b == 1:
                self.group_sat[gid] = False
            for ci, coef in self.var_cons[vi]:
                con = self.cons[ci]
                con[3] -= coef * b
                if coef > 0:
                    con[5] += coef
                else:
                    con[4] += coef

    def propagate(self, from_scratch: bool = False) -> bool:
        """Force variables whose value is implied by constraint bounds; a
        worklist keeps re-checking touched constraints only."""
        if from_scratch:
            self._queue = list(range(len(self.cons)))
            for ci in self._queue:
                self._queued[ci] = True
        while self._queue:
            ci = self._queue.pop()
            self._queued[ci] = False
            con = self.cons[ci]
            terms, rel, rhs, fixed, min_rem, max_rem = con
            lo = fixed + min_rem
            hi = fixed + max_rem
            if rel == GE:
                if hi < rhs:
                    self._drain()
                    return False
                force_max = hi == rhs and min_rem != max_rem
                force_min = False
            else:
                if hi < rhs or lo > rhs:
                    self._drain()
                    return False
                force_max = hi == rhs and min_rem != max_rem
                force_min = lo == rhs and min_rem != max_rem
            if force_max or force_min:
                for vi, coef in list(terms):
                    if self.val[vi] != -1:
                        continue
                    if force_max:
                        b = 1 if coef > 0 else 0
                    else:
                        b = 0 if coef > 0 else 1
                    if not self.assign(vi, b):
                        self._drain()
                        return False
        return True

    def _drain(self):
        for ci in self._queue:
            self._queued[ci] = False
        self._queue.clear()

    def lower_bound(self) -> int:
        lb = self.obj_fixed
        for vi in range(len(self.names)):
            if self.val[vi] == -1 and self.group_of[vi] == -1 and self.obj[vi] < 0:
                lb += self.obj[vi]
        for gid, members in enumerate(self.groups):
            if self.group_sat[gid]:
                continue
            best = None
            for vi in members:
                if self.val[vi] == -1:
                    if best is None or self.obj[vi] < best:
                        best = self.obj[vi]
            if best is not None:
                lb += best
        return lb

    def snapshot(self) -> dict:
        return {n: self.val[i] for i, n in enumerate(self.names)}


def solve(model: IlpModel, time_budget: Optional[float] = None) -> IlpResult:
    """Exact optimum of a 0-1 model.

    Returns an optimal assignment (lexicographically smallest under sorted
    variable names among optima), INFEASIBLE, or BUDGET_EXCEEDED with the
    best incumbent found within ``time_budget`` seconds.
    """
    deadline = time.monotonic() + time_budget if time_budget is not None else None
    s = _Searcher(model, deadline)
    n = len(s.names)
    sign = s.sign
    if sys.getrecursionlimit() < 4 * n + 1000:
        sys.setrecursionlimit(4 * n + 1000)

    # Free variables outside every exactly-one group are branched on by
    # objective impact; everything else is settled by group branching.
    phase1_order = sorted(
        range(n), key=lambda vi: (-abs(s.obj[vi]), s.names[vi])
    )

    best_val: Optional[int] = None
    best_snapshot: Optional[dict] = None

    def dfs_value():
        nonlocal best_val, best_snapshot
        s._tick()
        vi = next((v for v in phase1_order if s.val[v] == -1), None)
        if vi is None:
            obj = s.obj_fixed
            if best_val is None or obj < best_val:
                best_val = obj
                best_snapshot = s.snapshot()
            return
        first = 0 if s.obj[vi] >= 0 else 1
        for b in (first, 1 - first):
            mark = len(s.trail)
            if s.assign(vi, b) and s.propagate():
                lb = s.lower_bound()
                if best_val is None or lb < best_val:
                    dfs_value()
            s.undo_to(mark)

    try:
        mark0 = len(s.trail)
        if s.propagate(from_scratch=True):
            dfs_value()
        s.undo_to(mark0)
    except _Budget:
        if best_val is None:
            return IlpResult(BUDGET_EXCEEDED)
        values = best_snapshot
        return IlpResult(
            BUDGET_EXCEEDED, Assignment(values, sign * best_val)
        )

    if best_val is None:
        return IlpResult(INFEASIBLE)

    # Second pass: extract the lexicographically smallest assignment that
    # attains the optimum, trying 0 before 1 in sorted-name order.
    lex_order = sorted(range(n), key=lambda vi: s.names[vi])
    target = best_val
    found: Optional[dict] = None

    def dfs_lex(pos: int):
        nonlocal found
        if found is not None:
            return
        s._tick()
        vi = None
        for k in range(pos, n):
            if s.val[lex_order[k]] == -1:
                vi = lex_order[k]
                pos = k
                break
        if vi is None:
            if s.obj_fixed == target:
                found = s.snapshot()
            return
        for b in (0, 1):
            mark = len(s.trail)
            if s.assign(vi, b) and s.propagate() and s.lower_bound() <= target:
                dfs_lex(pos + 1)
            s.undo_to(mark)
            if found is not None:
                return

    try:
        if s.propagate(from_scratch=True):
            dfs_lex(0)
    except _Budget:
        return IlpResult(
            BUDGET_EXCEEDED, Assignment(best_snapshot, sign * best_val)
        )

    values = found if found is not None else best_snapshot
    return IlpResult(OPTIMAL, Assignment(values, sign * best_val))
