"""Student-facing feedback rendered from a repair.

Small edits are spelled out (the changed operator, variable or constant);
larger edits become templates whose uncertain parts are holes; at most three
items are shown, highest cost first.  When there is no repair, or the repair
is too large to be useful, a per-problem fallback text is returned instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .lower import format_expr
from .model import (
    Const,
    END,
    Expr,
    OpApply,
    PrimedVarRef,
    Program,
    RET_VAR,
    COND_VAR,
    VarRef,
)
from .repair import DELETED, Modification, RepairResult, fresh_name

HOLE = "□"  # shown for variables and expressions the student must find
EXPLICIT_COST_LIMIT = 2  # single operator/variable/constant edits
MAX_ITEMS = 3


@dataclass(frozen=True)
class FeedbackItem:
    line: int
    kind: str  # "explicit" | "template" | "delete"
    message: str
    cost: int

    def to_record(self) -> dict:
        return {"line": self.line, "kind": self.kind,
                "message": self.message, "cost": self.cost}


@dataclass(frozen=True)
class Feedback:
    items: tuple = ()
    fallback: Optional[str] = None

    def to_text(self) -> str:
        if self.fallback is not None:
            return self.fallback
        return "\n".join(f"line {i.line}: {i.message}" for i in self.items)

    def to_record(self) -> dict:
        return {
            "items": [i.to_record() for i in self.items],
            "fallback": self.fallback,
        }


def rank_modifications(mods) -> List[Tuple[Modification, int]]:
    """Deterministic importance order: highest cost first, then earliest
    line, then variable name.  Returns (modification, line) pairs."""
    return sorted(mods, key=lambda pair: (-pair[0].cost, pair[1], pair[0].impl_var))


def render(result: Optional[RepairResult], impl: Optional[Program],
           fallback_text: str, cost_threshold: int = 100) -> Feedback:
    """Feedback for a repair result; the fallback when there is nothing
    useful to say."""
    if result is None or impl is None or result.total_cost > cost_threshold:
        return Feedback(items=(), fallback=fallback_text)
    if not result.mods:
        return Feedback(items=(), fallback=fallback_text)
    star_names = {v for v in result.pi.values() if v.startswith("$new_")}
    pairs = [(mod, _anchor_line(mod, impl)) for mod in result.mods]
    items = []
    for mod, line in rank_modifications(pairs)[:MAX_ITEMS]:
        items.append(_render_mod(mod, line, impl, star_names))
    return Feedback(items=tuple(items))


def _anchor_line(mod: Modification, impl: Program) -> int:
    line = impl.stmt_lines.get((mod.impl_loc, mod.impl_var))
    if line is not None:
        return line
    # inserted statement: anchor at the return when the location has one,
    # otherwise at the end of the location's span
    ret_line = impl.stmt_lines.get((mod.impl_loc, RET_VAR))
    if ret_line is not None:
        return ret_line
    span = impl.source_spans.get(mod.impl_loc)
    return span[1] if span else 1


def _render_mod(mod: Modification, line: int, impl: Program,
                star_names) -> FeedbackItem:
    if mod.is_deletion:
        return FeedbackItem(
            line, "delete",
            f"Remove the assignment to {mod.impl_var} at line {line}.",
            mod.cost)

    context = _context_phrase(mod, impl)
    if mod.inserts_statement:
        rendered = _format_with_holes(mod.new_expr, star_names, None)
        target = HOLE if mod.impl_var in star_names else mod.impl_var
        ret_line = impl.stmt_lines.get((mod.impl_loc, RET_VAR))
        where = (f"before the return at line {ret_line}"
                 if ret_line is not None else f"at line {line}")
        return FeedbackItem(
            line, "template",
            f"Insert {where}: {target} = {rendered}.",
            mod.cost)

    if mod.cost <= EXPLICIT_COST_LIMIT:
        diffs = _label_diffs(mod.old_expr, mod.new_expr)
        if diffs is not None and diffs:
            changes = " and ".join(f"{a} to {b}" for a, b in diffs)
            return FeedbackItem(
                line, "explicit",
                f"Change {changes} in {context} at line {line}.",
                mod.cost)
        return FeedbackItem(
            line, "explicit",
            f"Replace {format_expr(mod.old_expr)} with "
            f"{format_expr(mod.new_expr)} in {context} at line {line}.",
            mod.cost)

    rendered = _format_with_holes(mod.new_expr, star_names, mod.old_expr)
    return FeedbackItem(
        line, "template",
        f"{context.capitalize()} at line {line} should compute: {rendered}.",
        mod.cost)


def _context_phrase(mod: Modification, impl: Program) -> str:
    if mod.impl_var == COND_VAR:
        return ("the loop condition" if _is_loop_head(impl, mod.impl_loc)
                else "the branch condition")
    if mod.impl_var == RET_VAR:
        return "the return value"
    return f"the assignment to {mod.impl_var}"


def _is_loop_head(p: Program, loc: int) -> bool:
    """A location some successor path leads back to."""
    seen = set()
    stack = [p.succ[(loc, True)], p.succ[(loc, False)]]
    while stack:
        cur = stack.pop()
        if cur is END or cur in seen:
            continue
        if cur == loc:
            return True
        seen.add(cur)
        stack.append(p.succ[(cur, True)])
        stack.append(p.succ[(cur, False)])
    return False


def _token(e: Expr) -> str:
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, PrimedVarRef):
        return format_expr(e)
    if isinstance(e, Const):
        return format_expr(e)
    if isinstance(e, OpApply):
        return e.op
    return str(e)


def _label_diffs(old: Expr, new: Expr):
    """Token pairs when the trees differ only in node labels (same shape);
    None when shapes diverge."""
    diffs: List[Tuple[str, str]] = []

    def walk(a: Expr, b: Expr) -> bool:
        a_children = a.args if isinstance(a, OpApply) else ()
        b_children = b.args if isinstance(b, OpApply) else ()
        if len(a_children) != len(b_children):
            return False
        if type(a) is not type(b) or _token(a) != _token(b):
            if isinstance(a, OpApply) != isinstance(b, OpApply):
                return False
            diffs.append((_token(a), _token(b)))
        return all(walk(x, y) for x, y in zip(a_children, b_children))

    if not walk(old, new):
        return None
    return diffs


def _format_with_holes(e: Expr, star_names, old: Optional[Expr]) -> str:
    """Render an expression with holes for introduced variables and, when an
    original expression is given, for the subtrees that changed."""
    held = _with_holes(e, star_names, old)
    return format_expr(held)


_HOLE_REF = VarRef(HOLE)


def _with_holes(e: Expr, star_names, old: Optional[Expr]) -> Expr:
    if old is not None:
        return _diff_holes(e, old, star_names)
    return _star_holes(e, star_names)


def _star_holes(e: Expr, star_names) -> Expr:
    if isinstance(e, (VarRef, PrimedVarRef)):
        return _HOLE_REF if e.name in star_names else e
    if isinstance(e, OpApply):
        return OpApply(e.op, tuple(_star_holes(a, star_names) for a in e.args))
    return e


def _diff_holes(new: Expr, old: Expr, star_names) -> Expr:
    """Matching structure stays, changed parts become holes."""
    if new == old:
        return _star_holes(new, star_names)
    if (isinstance(new, OpApply) and isinstance(old, OpApply)
            and new.op == old.op and len(new.args) == len(old.args)):
        return OpApply(new.op, tuple(
            _diff_holes(n, o, star_names) for n, o in zip(new.args, old.args)))
    return _HOLE_REF
