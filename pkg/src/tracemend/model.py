"""Core program model: values, expressions, memories, programs, traces.

Every other module speaks these types.  A program is a set of locations,
each labeling every variable with an expression (identity by default), plus
a boolean-branched successor function.  Within one location, a primed
reference ``v'`` reads the value of ``v`` assigned earlier at that location;
an unprimed reference reads the value ``v`` had on entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union


class _Undef:
    """The undefined value; compares equal only to itself."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "undef"

    def __bool__(self):
        return False


UNDEF = _Undef()

Value = Union[int, float, bool, str, list, _Undef]

# Relative/absolute tolerance for float comparison: different but equivalent
# float expressions may differ in last-bit rounding.
FLOAT_REL_TOL = 1e-9
FLOAT_ABS_TOL = 1e-12


def values_equal(a: Value, b: Value) -> bool:
    """Value equality: floats under tolerance, lists element-wise, undef only
    to undef.  Ints and floats compare across type (1 == 1.0) but bools do
    not equal numbers."""
    if a is UNDEF or b is UNDEF:
        return a is UNDEF and b is UNDEF
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if isinstance(a, int) and isinstance(b, int):
            return a == b
        return abs(a - b) <= max(FLOAT_ABS_TOL, FLOAT_REL_TOL * max(abs(a), abs(b)))
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return False
        return all(values_equal(x, y) for x, y in zip(a, b))
    return False


def freeze_value(v: Value):
    """Hashable key for a value (used for deduplication, not equality)."""
    if isinstance(v, list):
        return ("list",) + tuple(freeze_value(x) for x in v)
    if v is UNDEF:
        return ("undef",)
    return (type(v).__name__, v)


# ---------------------------------------------------------------------------
# Expressions


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class VarRef(Expr):
    name: str

    def __repr__(self):
        return f"VarRef({self.name})"


@dataclass(frozen=True)
class PrimedVarRef(Expr):
    name: str

    def __repr__(self):
        return f"PrimedVarRef({self.name})"


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        object.__setattr__(self, "value", value)

    def __setattr__(self, *args):
        raise AttributeError("Const is immutable")

    def __eq__(self, other):
        # type-aware so Const(1) != Const(True) != Const(1.0)
        return (
            isinstance(other, Const)
            and type(self.value) is type(other.value)
            and self.value == other.value
        )

    def __hash__(self):
        return hash((Const, type(self.value).__name__, self.value))

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True)
class OpApply(Expr):
    op: str
    args: tuple

    def __repr__(self):
        return f"OpApply({self.op}, {list(self.args)})"


def op_apply(op: str, *args: Expr) -> OpApply:
    return OpApply(op, tuple(args))


def expr_children(e: Expr) -> tuple:
    return e.args if isinstance(e, OpApply) else ()


def walk_expr(e: Expr) -> Iterator[Expr]:
    """Preorder traversal."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, OpApply):
            stack.extend(reversed(node.args))


def expr_vars(e: Expr) -> set:
    """Unprimed names of all variables occurring in e, primed or not."""
    return {
        n.name for n in walk_expr(e) if isinstance(n, (VarRef, PrimedVarRef))
    }


def rename_vars(e: Expr, mapping: Mapping[str, str]) -> Expr:
    """Replace each variable v by mapping[v], preserving primes.  Names not in
    the mapping are left untouched."""
    if isinstance(e, VarRef):
        return VarRef(mapping.get(e.name, e.name))
    if isinstance(e, PrimedVarRef):
        return PrimedVarRef(mapping.get(e.name, e.name))
    if isinstance(e, OpApply):
        return OpApply(e.op, tuple(rename_vars(a, mapping) for a in e.args))
    return e


# Operation arity table; None means variadic (checked at evaluation).
OP_ARITY = {
    "+": 2, "-": 2, "*": 2, "/": 2, "%": 2, "**": 2,
    "==": 2, "!=": 2, "<": 2, "<=": 2, ">": 2, ">=": 2,
    "and": 2, "or": 2, "not": 1, "neg": 1,
    "ite": 3,
    "getitem": 2, "slice": 3, "slice_from": 2, "slice_to": 2,
    "len": 1, "append": 2, "insert": 3, "concat": 2,
    "float": 1, "int": 1, "abs": 1,
    "min": None, "max": None,
    "range": None, "list": 1, "index": 2,
    "mklist": None,
}

# Builtins callable by name in source; the remaining ops come from operators
# and literal syntax.
BUILTIN_FUNCTIONS = (
    "len", "append", "insert", "concat", "float", "int", "abs",
    "min", "max", "range", "list", "index",
)


def validate_expr(e: Expr, path: str = "expr") -> list:
    """Arity and well-formedness diagnostics for an expression tree."""
    out = []
    for node in walk_expr(e):
        if isinstance(node, OpApply):
            arity = OP_ARITY.get(node.op)
            if node.op not in OP_ARITY:
                out.append(f"{path}: unknown operation '{node.op}'")
            elif arity is not None and len(node.args) != arity:
                out.append(
                    f"{path}: operation '{node.op}' expects {arity} "
                    f"argument(s), got {len(node.args)}"
                )
        elif isinstance(node, Const):
            if not isinstance(node.value, (int, float, bool, str)):
                out.append(f"{path}: unsupported constant {node.value!r}")
    return out


# ---------------------------------------------------------------------------
# Memories and traces


def primed(name: str) -> str:
    return name + "'"


class Memory:
    """Finite map from (possibly primed) names to values.  Lookup of an
    unbound name yields UNDEF, never an error."""

    __slots__ = ("_bindings",)

    def __init__(self, bindings: Optional[Mapping[str, Value]] = None):
        self._bindings = dict(bindings) if bindings else {}

    def get(self, name: str) -> Value:
        return self._bindings.get(name, UNDEF)

    def bound_names(self):
        return self._bindings.keys()

    def as_dict(self) -> dict:
        return dict(self._bindings)

    def freeze(self):
        return tuple(
            sorted((k, freeze_value(v)) for k, v in self._bindings.items())
        )

    def __eq__(self, other):
        if not isinstance(other, Memory):
            return NotImplemented
        names = set(self._bindings) | set(other._bindings)
        return all(values_equal(self.get(n), other.get(n)) for n in names)

    def __hash__(self):  # pragma: no cover - memories are not dict keys
        raise TypeError("Memory is unhashable; use freeze()")

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in sorted(self._bindings.items()))
        return f"Memory({inner})"


@dataclass(frozen=True)
class Trace:
    """Sequence of (location, memory) pairs.  In each step the memory holds
    both the entry value sigma(v) and the post value sigma(v')."""

    steps: tuple

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    def locations(self) -> tuple:
        return tuple(loc for loc, _ in self.steps)

    def final_memory(self) -> Memory:
        return self.steps[-1][1]


# ---------------------------------------------------------------------------
# Programs


class _End:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "END"


END = _End()

COND_VAR = "$cond"
RET_VAR = "$ret"
# Fixed in this version; the model would admit further special variables.
SPECIAL_VARS = (COND_VAR, RET_VAR)


@dataclass(frozen=True)
class Program:
    """A program over locations with per-variable expression labels.

    ``labels`` holds only explicit assignments; everywhere else a variable
    keeps its value (see :func:`Program.label`).  ``succ`` maps every
    (location, branch) pair to a location or END.  ``stmt_lines`` maps each
    explicit label back to its source line for feedback.
    """

    name: str
    locations: tuple
    init: int
    vars: tuple
    params: tuple
    labels: dict
    succ: dict
    source_spans: dict = field(default_factory=dict)
    stmt_lines: dict = field(default_factory=dict)

    def label(self, loc: int, var: str) -> Expr:
        """The expression assigned to var at loc; identity when the source
        leaves the variable alone."""
        return self.labels.get((loc, var), VarRef(var))

    def has_explicit_label(self, loc: int, var: str) -> bool:
        return (loc, var) in self.labels

    def assigned_vars(self, loc: int):
        return [v for v in self.vars if (loc, v) in self.labels]

    @property
    def special_vars(self) -> tuple:
        return SPECIAL_VARS

    def non_special_vars(self) -> tuple:
        return tuple(v for v in self.vars if v not in SPECIAL_VARS)


def default_label(p: Program, loc: int, var: str) -> Expr:
    return p.label(loc, var)


def validate_program(p: Program) -> list:
    """Diagnostics for the program invariants; empty list means valid."""
    diags = []
    locs = set(p.locations)
    if p.init not in locs:
        diags.append(f"init location {p.init} not among locations")
    for v in SPECIAL_VARS:
        if v not in p.vars:
            diags.append(f"special variable {v} missing from vars")
    for param in p.params:
        if param not in p.vars:
            diags.append(f"parameter {param} missing from vars")
    for loc in p.locations:
        for b in (True, False):
            if (loc, b) not in p.succ:
                diags.append(f"succ undefined for ({loc}, {b})")
            else:
                target = p.succ[(loc, b)]
                if target is not END and target not in locs:
                    diags.append(f"succ({loc}, {b}) = {target} is not a location")
    for (loc, var), e in p.labels.items():
        if loc not in locs:
            diags.append(f"label at unknown location {loc}")
        if var not in p.vars:
            diags.append(f"label for unknown variable {var}")
        diags.extend(validate_expr(e, path=f"label({loc}, {var})"))
        unknown = expr_vars(e) - set(p.vars)
        if unknown:
            diags.append(
                f"label({loc}, {var}) references unknown variable(s) "
                + ", ".join(sorted(unknown))
            )
    return diags
