"""Expression evaluation and program execution.

Running a program on an input memory yields a trace: at every location all
variable labels are evaluated (in primed-dependency order, ties broken by
declaration order), post values become the next step's entry values, and the
post value of $cond picks the successor.  A step limit stands in for
nontermination.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Union

from .model import (
    COND_VAR,
    END,
    Const,
    Expr,
    Memory,
    OpApply,
    PrimedVarRef,
    Program,
    Trace,
    UNDEF,
    VarRef,
    primed,
    values_equal,
)

DEFAULT_STEP_LIMIT = 100_000


class EvalError(Exception):
    pass


def _num(v, what="operand"):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalError(f"{what} is not a number: {v!r}")
    return v


def _int_index(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise EvalError(f"index is not an integer: {v!r}")
    return v


def _list(v, what="operand"):
    if not isinstance(v, list):
        raise EvalError(f"{what} is not a list: {v!r}")
    return v


def _bool(v, what="condition"):
    if not isinstance(v, bool):
        raise EvalError(f"{what} is not a boolean: {v!r}")
    return v


def _check_defined(v):
    if v is UNDEF:
        raise EvalError("undefined value in operation")
    return v


def eval_expr(e: Expr, m: Memory):
    """Value of e under m.  Unbound names yield the undefined value; type
    mismatches, bad indices and division by zero raise EvalError."""
    if isinstance(e, VarRef):
        return m.get(e.name)
    if isinstance(e, PrimedVarRef):
        return m.get(primed(e.name))
    if isinstance(e, Const):
        return e.value
    if isinstance(e, OpApply):
        return _apply(e, m)
    raise EvalError(f"not an expression: {e!r}")


def _apply(e: OpApply, m: Memory):
    op = e.op

    # lazy operations evaluate only the branches they need
    if op == "ite":
        guard = _bool(_check_defined(eval_expr(e.args[0], m)))
        return eval_expr(e.args[1] if guard else e.args[2], m)
    if op == "and":
        left = _bool(_check_defined(eval_expr(e.args[0], m)))
        if not left:
            return False
        return _bool(_check_defined(eval_expr(e.args[1], m)))
    if op == "or":
        left = _bool(_check_defined(eval_expr(e.args[0], m)))
        if left:
            return True
        return _bool(_check_defined(eval_expr(e.args[1], m)))

    args = [eval_expr(a, m) for a in e.args]

    if op == "==":
        return values_equal(args[0], args[1])
    if op == "!=":
        return not values_equal(args[0], args[1])

    for a in args:
        _check_defined(a)

    if op == "+":
        a, b = args
        if isinstance(a, list) and isinstance(b, list):
            return a + b
        if isinstance(a, str) and isinstance(b, str):
            return a + b
        return _num(a) + _num(b)
    if op == "-":
        return _num(args[0]) - _num(args[1])
    if op == "*":
        return _num(args[0]) * _num(args[1])
    if op == "/":
        a, b = _num(args[0]), _num(args[1])
        if b == 0:
            raise EvalError("division by zero")
        return a / b
    if op == "%":
        a, b = _num(args[0]), _num(args[1])
        if b == 0:
            raise EvalError("modulo by zero")
        return a % b
    if op == "**":
        a, b = _num(args[0]), _num(args[1])
        try:
            result = a ** b
        except (OverflowError, ZeroDivisionError) as exc:
            raise EvalError(f"power failed: {exc}")
        if isinstance(result, complex):
            raise EvalError("complex result of power")
        return result
    if op in ("<", "<=", ">", ">="):
        a, b = args
        if isinstance(a, str) and isinstance(b, str):
            pass
        else:
            a, b = _num(a), _num(b)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b
    if op == "not":
        return not _bool(args[0])
    if op == "neg":
        return -_num(args[0])
    if op == "len":
        v = args[0]
        if isinstance(v, (list, str)):
            return len(v)
        raise EvalError(f"len of non-sequence: {v!r}")
    if op == "append":
        return _list(args[0], "append target") + [args[1]]
    if op == "insert":
        lst = _list(args[0], "insert target")
        i = _int_index(args[1])
        out = list(lst)
        out.insert(i, args[2])
        return out
    if op == "concat":
        return _list(args[0]) + _list(args[1])
    if op == "float":
        v = args[0]
        if isinstance(v, bool) or not isinstance(v, (int, float, str)):
            raise EvalError(f"cannot convert to float: {v!r}")
        try:
            return float(v)
        except ValueError:
            raise EvalError(f"cannot convert to float: {v!r}")
    if op == "int":
        v = args[0]
        if isinstance(v, bool) or not isinstance(v, (int, float, str)):
            raise EvalError(f"cannot convert to int: {v!r}")
        try:
            return int(v)
        except ValueError:
            raise EvalError(f"cannot convert to int: {v!r}")
    if op == "abs":
        return abs(_num(args[0]))
    if op in ("min", "max"):
        fn = min if op == "min" else max
        if len(args) == 1:
            seq = _list(args[0], f"{op} argument")
            if not seq:
                raise EvalError(f"{op} of empty list")
            return fn(_num(x) for x in seq)
        if len(args) < 2:
            raise EvalError(f"{op} needs at least one argument")
        return fn(_num(x) for x in args)
    if op == "range":
        if len(args) == 1:
            lo, hi = 0, _int_index(args[0])
        elif len(args) == 2:
            lo, hi = _int_index(args[0]), _int_index(args[1])
        else:
            raise EvalError("range takes one or two arguments")
        return list(range(lo, hi))
    if op == "list":
        v = args[0]
        if isinstance(v, list):
            return list(v)
        if isinstance(v, str):
            return list(v)
        raise EvalError(f"cannot convert to list: {v!r}")
    if op == "index":
        lst = _list(args[0], "index target")
        for i, x in enumerate(lst):
            if values_equal(x, args[1]):
                return i
        raise EvalError(f"value not in list: {args[1]!r}")
    if op == "getitem":
        seq = args[0]
        if not isinstance(seq, (list, str)):
            raise EvalError(f"indexing into non-sequence: {seq!r}")
        i = _int_index(args[1])
        if not -len(seq) <= i < len(seq):
            raise EvalError(f"index {i} out of range for length {len(seq)}")
        return seq[i]
    if op == "slice":
        seq = args[0]
        if not isinstance(seq, (list, str)):
            raise EvalError(f"slicing non-sequence: {seq!r}")
        return seq[_int_index(args[1]):_int_index(args[2])]
    if op == "slice_from":
        seq = args[0]
        if not isinstance(seq, (list, str)):
            raise EvalError(f"slicing non-sequence: {seq!r}")
        return seq[_int_index(args[1]):]
    if op == "slice_to":
        seq = args[0]
        if not isinstance(seq, (list, str)):
            raise EvalError(f"slicing non-sequence: {seq!r}")
        return seq[:_int_index(args[1])]
    if op == "mklist":
        return list(args)
    raise EvalError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# Program execution


@dataclass(frozen=True)
class Ok:
    trace: Trace


@dataclass(frozen=True)
class Error:
    step: int
    message: str
    loc: Optional[int] = None  # location whose label failed, when known
    var: Optional[str] = None  # variable whose label failed, when known


@dataclass(frozen=True)
class StepLimit:
    steps: int


RunOutcome = Union[Ok, Error, StepLimit]


@dataclass(frozen=True)
class InputSet:
    inputs: tuple

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("an input set must contain at least one input")

    def __iter__(self):
        return iter(self.inputs)

    def __len__(self):
        return len(self.inputs)

    def check_against(self, p: Program) -> List[str]:
        problems = []
        for i, mem in enumerate(self.inputs):
            if set(mem.bound_names()) != set(p.params):
                problems.append(
                    f"input {i} binds {sorted(mem.bound_names())}, "
                    f"program takes {sorted(p.params)}")
        return problems


def eval_order(p: Program, loc: int) -> List[str]:
    """Variables in an order honoring primed reads at loc: if label(v) reads
    u', u comes first.  Ties keep declaration order.  Raises EvalError on a
    primed-dependency cycle."""
    deps: Dict[str, set] = {v: set() for v in p.vars}
    for v in p.vars:
        e = p.label(loc, v)
        stack = [e]
        while stack:
            node = stack.pop()
            if isinstance(node, PrimedVarRef) and node.name in deps:
                deps[v].add(node.name)
            elif isinstance(node, OpApply):
                stack.extend(node.args)
    order = []
    state: Dict[str, int] = {}

    def visit(v):
        mark = state.get(v, 0)
        if mark == 1:
            raise EvalError(f"cyclic primed dependencies at location {loc}")
        if mark == 2:
            return
        state[v] = 1
        for u in sorted(deps[v], key=p.vars.index):
            visit(u)
        state[v] = 2
        order.append(v)

    for v in p.vars:
        visit(v)
    return order


def run(p: Program, input_memory: Memory,
        step_limit: int = DEFAULT_STEP_LIMIT) -> RunOutcome:
    """Execute p on one input; pure function of its arguments."""
    orders = {loc: None for loc in p.locations}
    pre = {v: input_memory.get(v) for v in p.vars}
    loc = p.init
    steps = []
    count = 0
    while True:
        count += 1
        if count > step_limit:
            return StepLimit(step_limit)
        if orders[loc] is None:
            try:
                orders[loc] = eval_order(p, loc)
            except EvalError as exc:
                return Error(len(steps), str(exc))
        work = dict(pre)
        for v in orders[loc]:
            e = p.label(loc, v)
            if isinstance(e, VarRef) and e.name == v:
                work[primed(v)] = pre[v]
                continue
            try:
                work[primed(v)] = eval_expr(e, Memory(work))
            except EvalError as exc:
                return Error(len(steps), f"at location {loc}, {v}: {exc}",
                             loc=loc, var=v)
        steps.append((loc, Memory(work)))
        cond = work[primed(COND_VAR)]
        succ_true = p.succ[(loc, True)]
        succ_false = p.succ[(loc, False)]
        if succ_true == succ_false:
            nxt = succ_true
        else:
            if not isinstance(cond, bool):
                return Error(len(steps) - 1,
                             f"branch on non-boolean $cond: {cond!r}")
            nxt = succ_true if cond else succ_false
        if nxt is END:
            return Ok(Trace(tuple(steps)))
        pre = {v: work[primed(v)] for v in p.vars}
        loc = nxt


def run_all(p: Program, inputs: InputSet,
            step_limit: int = DEFAULT_STEP_LIMIT) -> List[RunOutcome]:
    """Outcomes in input order."""
    return [run(p, mem, step_limit) for mem in inputs]


def final_return(outcome: RunOutcome):
    """The $ret value of a successful run, or None."""
    if not isinstance(outcome, Ok):
        return None
    return outcome.trace.final_memory().get(primed("$ret"))
