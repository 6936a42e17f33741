"""Ordered tree edit distance between expression ASTs.

This is the modification cost function used by repair: unit-cost relabel,
insert and delete over the ordered, labeled tree of an expression.  The
implementation is the Zhang-Shasha keyroot dynamic program.
"""

from __future__ import annotations

from .model import Const, Expr, OpApply, PrimedVarRef, VarRef, expr_children

RELABEL_COST = 1
INSERT_COST = 1
DELETE_COST = 1


def node_label(e: Expr) -> str:
    """Label used for edit-distance comparison.  Variables carry their name
    (primes included), constants their printed value, applications their
    operation name; so renaming one variable or flipping one operator costs
    exactly one relabel."""
    if isinstance(e, VarRef):
        return "var:" + e.name
    if isinstance(e, PrimedVarRef):
        return "var:" + e.name + "'"
    if isinstance(e, Const):
        return f"const:{type(e.value).__name__}:{e.value!r}"
    if isinstance(e, OpApply):
        return e.op
    raise TypeError(f"not an expression: {e!r}")


def node_count(e: Expr) -> int:
    return 1 + sum(node_count(c) for c in expr_children(e))


def delete_cost(e: Expr) -> int:
    """Cost of removing an expression entirely (distance to the empty tree)."""
    return node_count(e) * DELETE_COST


def insert_cost(e: Expr) -> int:
    """Cost of introducing an expression where none existed."""
    return node_count(e) * INSERT_COST


class _Annotated:
    """Postorder node list, leftmost leaf descendants, and keyroots."""

    __slots__ = ("labels", "lmds", "keyroots")

    def __init__(self, root: Expr):
        labels = []
        lmds = []

        def visit(node):
            first = None
            for child in expr_children(node):
                lmd = visit(child)
                if first is None:
                    first = lmd
            idx = len(labels)
            labels.append(node_label(node))
            lmds.append(first if first is not None else idx)
            return lmds[idx]

        visit(root)
        self.labels = labels
        self.lmds = lmds
        seen = {}
        for i, lmd in enumerate(lmds):
            seen[lmd] = i
        self.keyroots = sorted(seen.values())


def tree_distance(a: Expr, b: Expr) -> int:
    """Minimum-cost ordered edit script (unit relabel/insert/delete)
    transforming a into b."""
    if a == b:
        return 0
    ta, tb = _Annotated(a), _Annotated(b)
    la, lb = ta.lmds, tb.lmds
    m, n = len(ta.labels), len(tb.labels)
    td = [[0] * n for _ in range(m)]

    for i in ta.keyroots:
        for j in tb.keyroots:
            _treedist(ta, tb, i, j, td)
    return td[m - 1][n - 1]


def _treedist(ta, tb, i, j, td):
    la, lb = ta.lmds, tb.lmds
    al, bl = ta.labels, tb.labels
    m = i - la[i] + 2
    n = j - lb[j] + 2
    fd = [[0] * n for _ in range(m)]
    ioff = la[i] - 1
    joff = lb[j] - 1

    for x in range(1, m):
        fd[x][0] = fd[x - 1][0] + DELETE_COST
    for y in range(1, n):
        fd[0][y] = fd[0][y - 1] + INSERT_COST

    for x in range(1, m):
        for y in range(1, n):
            if la[i] == la[x + ioff] and lb[j] == lb[y + joff]:
                relabel = 0 if al[x + ioff] == bl[y + joff] else RELABEL_COST
                fd[x][y] = min(
                    fd[x - 1][y] + DELETE_COST,
                    fd[x][y - 1] + INSERT_COST,
                    fd[x - 1][y - 1] + relabel,
                )
                td[x + ioff][y + joff] = fd[x][y]
            else:
                p = la[x + ioff] - 1 - ioff
                q = lb[y + joff] - 1 - joff
                fd[x][y] = min(
                    fd[x - 1][y] + DELETE_COST,
                    fd[x][y - 1] + INSERT_COST,
                    fd[p][q] + td[x + ioff][y + joff],
                )
