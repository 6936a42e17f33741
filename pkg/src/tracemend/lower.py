"""Lowering from the mini-language AST to the program model.

Maximal straight-line regions become locations; loop conditions and loop
bodies get their own locations.  A loop-free if/else folds into ``ite``
expressions; an if containing a loop or a return becomes real branching.
Within one location, later reads of earlier-assigned variables become primed
references, so a statement sequence is a single simultaneous assignment.
``for v in range(a, b)`` introduces an implicit counter ``$iterN``.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from . import minilang as ml
from .model import (
    COND_VAR,
    END,
    Const,
    Expr,
    OpApply,
    PrimedVarRef,
    Program,
    RET_VAR,
    SPECIAL_VARS,
    VarRef,
)

PRIME_MARK = "′"  # rendering of a primed variable


class LoweringError(Exception):
    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.message = message
        self.line = line


class _Region:
    __slots__ = ("id", "labels", "lines", "assigned", "min_line", "max_line")

    def __init__(self, loc_id: int):
        self.id = loc_id
        self.labels: Dict[str, Expr] = {}
        self.lines: Dict[str, int] = {}
        self.assigned: Dict[str, bool] = {}
        self.min_line: Optional[int] = None
        self.max_line: Optional[int] = None

    def touch_line(self, line: int):
        if self.min_line is None or line < self.min_line:
            self.min_line = line
        if self.max_line is None or line > self.max_line:
            self.max_line = line


class _Lowerer:
    def __init__(self, fn: ml.FuncDef):
        self.fn = fn
        self.regions: List[_Region] = []
        self.succ: Dict[Tuple[int, bool], object] = {}
        self.var_order: List[str] = []
        self.iter_count = 0
        for p in fn.params:
            if p in self.var_order:
                raise LoweringError(f"duplicate parameter {p!r}", fn.line)
            self.var_order.append(p)

    # -- bookkeeping

    def seen_var(self, name: str):
        if name not in self.var_order:
            self.var_order.append(name)

    def new_region(self) -> _Region:
        region = _Region(len(self.regions) + 1)
        self.regions.append(region)
        return region

    def close_edges(self, edges, target):
        for loc, branch in edges:
            self.succ[(loc, branch)] = target

    # -- expressions

    def lower_expr(self, node: ml.Node, naming) -> Expr:
        """naming: set of variables already assigned at the current location;
        reads of those become primed."""
        if isinstance(node, ml.ELit):
            return Const(node.value)
        if isinstance(node, ml.EName):
            self.seen_var(node.id)
            if node.id in naming:
                return PrimedVarRef(node.id)
            return VarRef(node.id)
        if isinstance(node, ml.EBin):
            return OpApply(node.op, (self.lower_expr(node.left, naming),
                                     self.lower_expr(node.right, naming)))
        if isinstance(node, ml.EUnary):
            return OpApply(node.op, (self.lower_expr(node.operand, naming),))
        if isinstance(node, ml.ECall):
            return OpApply(node.fn,
                           tuple(self.lower_expr(a, naming) for a in node.args))
        if isinstance(node, ml.EIndex):
            return OpApply("getitem", (self.lower_expr(node.obj, naming),
                                       self.lower_expr(node.index, naming)))
        if isinstance(node, ml.ESlice):
            obj = self.lower_expr(node.obj, naming)
            if node.lo is not None and node.hi is not None:
                return OpApply("slice", (obj, self.lower_expr(node.lo, naming),
                                         self.lower_expr(node.hi, naming)))
            if node.lo is not None:
                return OpApply("slice_from", (obj, self.lower_expr(node.lo, naming)))
            if node.hi is not None:
                return OpApply("slice_to", (obj, self.lower_expr(node.hi, naming)))
            return OpApply("list", (obj,))
        if isinstance(node, ml.EList):
            return OpApply("mklist",
                           tuple(self.lower_expr(e, naming) for e in node.elems))
        raise LoweringError(f"cannot lower expression {node!r}")

    # -- statements

    def add_assign(self, region: _Region, var: str, value: ml.Node, line: int):
        if var in region.assigned:
            raise LoweringError(
                f"variable {var!r} is assigned twice in one straight-line block",
                line)
        expr = self.lower_expr(value, region.assigned)
        self.seen_var(var)
        region.labels[var] = expr
        region.lines[var] = line
        region.assigned[var] = True
        region.touch_line(line)

    def add_lowered_assign(self, region: _Region, var: str, expr: Expr, line: int):
        self.seen_var(var)
        region.labels[var] = expr
        region.lines[var] = line
        region.assigned[var] = True
        region.touch_line(line)

    def fold_stmts(self, stmts, outer_assigned: Dict[str, bool]) -> Dict[str, Expr]:
        """Fold a loop-free, return-free statement list into one expression
        per assigned variable.  ``outer_assigned`` holds everything assigned
        before this point at the current location."""
        local: Dict[str, Expr] = {}

        def naming():
            merged = dict(outer_assigned)
            merged.update(local)
            return merged

        for stmt in stmts:
            if isinstance(stmt, ml.SAssign):
                if stmt.target in local or stmt.target in outer_assigned:
                    raise LoweringError(
                        f"variable {stmt.target!r} is reassigned within one "
                        "straight-line block (split it across lines with an "
                        "intermediate variable)", stmt.line)
                local[stmt.target] = self.lower_expr(stmt.value, naming())
                self.seen_var(stmt.target)
            elif isinstance(stmt, ml.SIf):
                cond_e = self.lower_expr(stmt.cond, naming())
                then_map = self.fold_stmts(stmt.then, naming())
                else_map = self.fold_stmts(stmt.orelse, naming())
                for var in list(then_map) + [v for v in else_map
                                             if v not in then_map]:
                    if var in local or var in outer_assigned:
                        raise LoweringError(
                            f"variable {var!r} is reassigned within one "
                            "straight-line block", stmt.line)
                    if var in naming():
                        unchanged: Expr = PrimedVarRef(var)
                    else:
                        unchanged = VarRef(var)
                    t = then_map.get(var, unchanged)
                    f = else_map.get(var, unchanged)
                    local[var] = OpApply("ite", (cond_e, t, f))
                    self.seen_var(var)
            else:
                raise LoweringError("unexpected statement while folding an if",
                                    getattr(stmt, "line", 0))
        return local

    def lower_seq(self, stmts, in_loop: bool):
        """Lower a statement sequence; returns (entry location or None,
        list of (location, branch) edges that fall through to whatever
        follows)."""
        region: Optional[_Region] = None
        entry: Optional[int] = None
        pending: List[Tuple[int, bool]] = []

        def ensure_region() -> _Region:
            nonlocal region, entry, pending
            if region is None:
                region = self.new_region()
                if entry is None:
                    entry = region.id
                self.close_edges(pending, region.id)
                pending = []
            return region

        for idx, stmt in enumerate(stmts):
            if isinstance(stmt, ml.SAssign):
                self.add_assign(ensure_region(), stmt.target, stmt.value, stmt.line)

            elif isinstance(stmt, ml.SReturn):
                if in_loop:
                    raise LoweringError(
                        "return inside a loop body is not supported", stmt.line)
                if idx != len(stmts) - 1:
                    raise LoweringError("unreachable code after return",
                                        stmts[idx + 1].line)
                r = ensure_region()
                self.add_assign(r, RET_VAR, stmt.value, stmt.line)
                self.close_edges([(r.id, True), (r.id, False)], END)
                return entry, []

            elif isinstance(stmt, ml.SIf):
                has_loop, has_return = _scan(stmt.then + stmt.orelse)
                if not has_loop and not has_return:
                    r = ensure_region()
                    folded = self.fold_stmts([stmt], r.assigned)
                    for var, expr in folded.items():
                        self.add_lowered_assign(r, var, expr, stmt.line)
                    continue
                # real branching: the current region evaluates the condition
                r = ensure_region()
                cond_e = self.lower_expr(stmt.cond, r.assigned)
                self.add_lowered_assign(r, COND_VAR, cond_e, stmt.line)
                region = None
                t_entry, t_ends = self.lower_seq(stmt.then, in_loop)
                self.succ[(r.id, True)] = t_entry
                pending = list(t_ends)
                if stmt.orelse:
                    e_entry, e_ends = self.lower_seq(stmt.orelse, in_loop)
                    self.succ[(r.id, False)] = e_entry
                    pending += e_ends
                else:
                    pending.append((r.id, False))

            elif isinstance(stmt, (ml.SWhile, ml.SForRange)):
                if isinstance(stmt, ml.SForRange):
                    self.iter_count += 1
                    counter = f"$iter{self.iter_count}"
                    start = stmt.start if stmt.start is not None else ml.ELit(0, line=stmt.line)
                    self.add_assign(ensure_region(), counter, start, stmt.line)
                    cond_ast: ml.Node = ml.EBin(
                        "<", ml.EName(counter, line=stmt.line), stmt.stop,
                        line=stmt.line)
                    body = (
                        [ml.SAssign(stmt.var, ml.EName(counter, line=stmt.line),
                                    line=stmt.line)]
                        + stmt.body
                        + [ml.SAssign(counter,
                                      ml.EBin("+", ml.EName(counter, line=stmt.line),
                                              ml.ELit(1, line=stmt.line),
                                              line=stmt.line),
                                      line=stmt.line)]
                    )
                else:
                    cond_ast = stmt.cond
                    body = stmt.body
                cond_region = self.new_region()
                cond_e = self.lower_expr(cond_ast, {})
                self.add_lowered_assign(cond_region, COND_VAR, cond_e, stmt.line)
                if region is not None:
                    self.close_edges([(region.id, True), (region.id, False)],
                                     cond_region.id)
                    region = None
                else:
                    self.close_edges(pending, cond_region.id)
                    pending = []
                if entry is None:
                    entry = cond_region.id
                b_entry, b_ends = self.lower_seq(body, in_loop=True)
                self.succ[(cond_region.id, True)] = b_entry
                self.close_edges(b_ends, cond_region.id)
                pending = [(cond_region.id, False)]

            else:
                raise LoweringError(f"cannot lower statement {stmt!r}",
                                    getattr(stmt, "line", 0))

        if region is not None:
            return entry, [(region.id, True), (region.id, False)]
        return entry, pending

    def finish(self) -> Program:
        entry, ends = self.lower_seq(self.fn.body, in_loop=False)
        if entry is None:
            raise LoweringError("empty function body", self.fn.line)
        self.close_edges(ends, END)

        labels = {}
        stmt_lines = {}
        spans = {}
        for r in self.regions:
            for var, expr in r.labels.items():
                labels[(r.id, var)] = expr
                stmt_lines[(r.id, var)] = r.lines[var]
            spans[r.id] = (r.min_line or self.fn.line, r.max_line or self.fn.line)

        var_order = list(self.var_order)
        for sv in SPECIAL_VARS:
            if sv not in var_order:
                var_order.append(sv)

        program = Program(
            name=self.fn.name,
            locations=tuple(r.id for r in self.regions),
            init=entry,
            vars=tuple(var_order),
            params=tuple(self.fn.params),
            labels=labels,
            succ=self.succ,
            source_spans=spans,
            stmt_lines=stmt_lines,
        )
        unreachable = _unreachable_locations(program)
        if unreachable:
            lines = sorted(spans[loc][0] for loc in unreachable)
            raise LoweringError(f"unreachable code around line {lines[0]}",
                                lines[0])
        return program


def _scan(stmts) -> Tuple[bool, bool]:
    has_loop = has_return = False
    for stmt in stmts:
        if isinstance(stmt, (ml.SWhile, ml.SForRange)):
            has_loop = True
            inner_loop, inner_ret = _scan(stmt.body)
            has_loop |= inner_loop
            has_return |= inner_ret
        elif isinstance(stmt, ml.SIf):
            inner_loop, inner_ret = _scan(stmt.then + stmt.orelse)
            has_loop |= inner_loop
            has_return |= inner_ret
        elif isinstance(stmt, ml.SReturn):
            has_return = True
    return has_loop, has_return


def _unreachable_locations(p: Program):
    seen = set()
    stack = [p.init]
    while stack:
        loc = stack.pop()
        if loc in seen or loc is END:
            continue
        seen.add(loc)
        for b in (True, False):
            stack.append(p.succ[(loc, b)])
    return [loc for loc in p.locations if loc not in seen]


def lower(fn: ml.FuncDef) -> Program:
    """Lower a parsed function to the program model."""
    return _Lowerer(fn).finish()


def lower_source(text: str, name: str = "<attempt>") -> Program:
    return lower(ml.parse(ml.SourceUnit(text, name)))


# ---------------------------------------------------------------------------
# Rendering model expressions back to surface syntax

_BIN_SYM = {
    "or": ("or", 1), "and": ("and", 2),
    "==": ("==", 4), "!=": ("!=", 4), "<": ("<", 4), "<=": ("<=", 4),
    ">": (">", 4), ">=": (">=", 4),
    "+": ("+", 5), "-": ("-", 5), "*": ("*", 6), "/": ("/", 6), "%": ("%", 6),
    "**": ("**", 8),
}


def format_expr(e: Expr) -> str:
    """Deterministic, re-parseable surface syntax; ite renders as a ternary
    and primed variables carry a prime mark."""
    return _fmt(e, 0)


def _fmt(e: Expr, parent_prec: int) -> str:
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, PrimedVarRef):
        return e.name + PRIME_MARK
    if isinstance(e, Const):
        v = e.value
        return repr(v) if isinstance(v, str) else str(v)
    if isinstance(e, OpApply):
        op = e.op
        if op in _BIN_SYM:
            sym, prec = _BIN_SYM[op]
            right_prec = prec if op == "**" else prec + 1
            left_prec = prec + 1 if op == "**" else prec
            text = f"{_fmt(e.args[0], left_prec)} {sym} {_fmt(e.args[1], right_prec)}"
            return f"({text})" if prec < parent_prec else text
        if op == "not":
            text = f"not {_fmt(e.args[0], 3)}"
            return f"({text})" if parent_prec > 3 else text
        if op == "neg":
            text = f"-{_fmt(e.args[0], 7)}"
            return f"({text})" if parent_prec > 7 else text
        if op == "ite":
            text = (f"({_fmt(e.args[0], 0)}) ? {_fmt(e.args[1], 1)}"
                    f" : {_fmt(e.args[2], 0)}")
            return f"({text})" if parent_prec > 0 else text
        if op == "getitem":
            return f"{_fmt(e.args[0], 9)}[{_fmt(e.args[1], 0)}]"
        if op == "slice":
            return f"{_fmt(e.args[0], 9)}[{_fmt(e.args[1], 0)}:{_fmt(e.args[2], 0)}]"
        if op == "slice_from":
            return f"{_fmt(e.args[0], 9)}[{_fmt(e.args[1], 0)}:]"
        if op == "slice_to":
            return f"{_fmt(e.args[0], 9)}[:{_fmt(e.args[1], 0)}]"
        if op == "mklist":
            return "[" + ", ".join(_fmt(a, 0) for a in e.args) + "]"
        args = ", ".join(_fmt(a, 0) for a in e.args)
        return f"{op}({args})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Re-parsing rendered expressions (round-trip checks and tooling)

class _ExprParser:
    """Parses format_expr output: the expression grammar plus ternaries and
    prime marks, producing model expressions directly."""

    def __init__(self, text: str):
        self.text = text
        self.tokens: List[ml.Token] = []
        ml._tokenize_line(text.replace(PRIME_MARK, "′"), 1, self.tokens)
        self.tokens.append(ml.Token("EOF", "", 1, len(text) + 1))
        self.pos = 0

    def peek(self):
        return self.tokens[min(self.pos, len(self.tokens) - 1)]

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def at(self, kind, value=None):
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    def expect(self, kind, value=None):
        if not self.at(kind, value):
            tok = self.peek()
            raise ml.ParseError(f"expected {value or kind!r}", tok.line, tok.col)
        return self.next()

    def parse(self) -> Expr:
        e = self.ternary()
        if not self.at("EOF"):
            tok = self.peek()
            raise ml.ParseError("trailing input", tok.line, tok.col)
        return e

    def ternary(self) -> Expr:
        cond = self.or_()
        if self.at("OP", "?"):
            self.next()
            then = self.ternary()
            self.expect("OP", ":")
            other = self.ternary()
            return OpApply("ite", (cond, then, other))
        return cond

    def or_(self) -> Expr:
        e = self.and_()
        while self.at("KEYWORD", "or"):
            self.next()
            e = OpApply("or", (e, self.and_()))
        return e

    def and_(self) -> Expr:
        e = self.not_()
        while self.at("KEYWORD", "and"):
            self.next()
            e = OpApply("and", (e, self.not_()))
        return e

    def not_(self) -> Expr:
        if self.at("KEYWORD", "not"):
            self.next()
            return OpApply("not", (self.not_(),))
        return self.cmp()

    def cmp(self) -> Expr:
        e = self.add()
        if self.at("OP") and self.peek().value in ("==", "!=", "<", "<=", ">", ">="):
            op = self.next().value
            return OpApply(op, (e, self.add()))
        return e

    def add(self) -> Expr:
        e = self.mul()
        while self.at("OP") and self.peek().value in ("+", "-"):
            op = self.next().value
            e = OpApply(op, (e, self.mul()))
        return e

    def mul(self) -> Expr:
        e = self.unary()
        while self.at("OP") and self.peek().value in ("*", "/", "%"):
            op = self.next().value
            e = OpApply(op, (e, self.unary()))
        return e

    def unary(self) -> Expr:
        if self.at("OP", "-"):
            self.next()
            return OpApply("neg", (self.unary(),))
        return self.power()

    def power(self) -> Expr:
        base = self.postfix()
        if self.at("OP", "**"):
            self.next()
            return OpApply("**", (base, self.unary()))
        return base

    def postfix(self) -> Expr:
        e = self.atom()
        while True:
            if self.at("OP", "["):
                self.next()
                lo = None
                if not self.at("OP", ":"):
                    lo = self.ternary()
                if self.at("OP", ":"):
                    self.next()
                    hi = None
                    if not self.at("OP", "]"):
                        hi = self.ternary()
                    self.expect("OP", "]")
                    if lo is not None and hi is not None:
                        e = OpApply("slice", (e, lo, hi))
                    elif lo is not None:
                        e = OpApply("slice_from", (e, lo))
                    elif hi is not None:
                        e = OpApply("slice_to", (e, hi))
                    else:
                        e = OpApply("list", (e,))
                else:
                    self.expect("OP", "]")
                    e = OpApply("getitem", (e, lo))
            else:
                return e

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return Const(int(tok.value))
        if tok.kind == "FLOAT":
            self.next()
            return Const(float(tok.value))
        if tok.kind == "STRING":
            self.next()
            return Const(tok.value)
        if tok.kind == "KEYWORD" and tok.value in ("True", "False"):
            self.next()
            return Const(tok.value == "True")
        if tok.kind == "NAME":
            self.next()
            if self.at("OP", "("):
                self.next()
                args = []
                if not self.at("OP", ")"):
                    args.append(self.ternary())
                    while self.at("OP", ","):
                        self.next()
                        args.append(self.ternary())
                self.expect("OP", ")")
                if tok.value == "mklist":
                    return OpApply("mklist", tuple(args))
                return OpApply(tok.value, tuple(args))
            if self.at("OP", PRIME_MARK):
                self.next()
                return PrimedVarRef(tok.value)
            return VarRef(tok.value)
        if tok.kind == "OP" and tok.value == "(":
            self.next()
            e = self.ternary()
            self.expect("OP", ")")
            return e
        if tok.kind == "OP" and tok.value == "[":
            self.next()
            elems = []
            if not self.at("OP", "]"):
                elems.append(self.ternary())
                while self.at("OP", ","):
                    self.next()
                    elems.append(self.ternary())
            self.expect("OP", "]")
            return OpApply("mklist", tuple(elems))
        raise ml.ParseError(f"expected expression, found {tok.value or tok.kind!r}",
                            tok.line, tok.col)


def parse_model_expr(text: str) -> Expr:
    """Inverse of format_expr (modulo whitespace)."""
    return _ExprParser(text).parse()
