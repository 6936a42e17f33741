"""Mini-language front end: lexer, parser, AST, and source printer.

The language is a small indentation-based imperative subset: one function
per file, assignments, if/elif/else, while, for-over-range, return, and
expressions over numbers, booleans, strings, lists and a fixed set of
builtin functions.  Files use the ``.mini`` extension; lines are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from .model import BUILTIN_FUNCTIONS


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class UnsupportedConstructError(ParseError):
    """Raised for syntactically recognizable constructs outside the language."""

    def __init__(self, construct: str, line: int, col: int):
        super().__init__(f"unsupported construct: {construct}", line, col)
        self.construct = construct


# ---------------------------------------------------------------------------
# Tokens

KEYWORDS = {
    "def", "if", "elif", "else", "while", "for", "in", "return",
    "and", "or", "not", "True", "False",
}

_TWO_CHAR = ("**", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=")
# "?" and the prime mark only ever appear in rendered model expressions;
# the statement grammar rejects them with a parse error.
_ONE_CHAR = "()[],:;=+-*/%<>.?′"


@dataclass
class Token:
    kind: str  # NAME KEYWORD INT FLOAT STRING OP NEWLINE INDENT DEDENT EOF
    value: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    indents = [0]
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        # strip comments outside strings
        stripped = _strip_comment(raw)
        if not stripped.strip():
            continue
        indent = len(stripped) - len(stripped.lstrip(" "))
        if "\t" in stripped[:indent]:
            raise ParseError("tabs are not allowed in indentation", lineno, 1)
        if indent > indents[-1]:
            indents.append(indent)
            tokens.append(Token("INDENT", "", lineno, 1))
        else:
            while indent < indents[-1]:
                indents.pop()
                tokens.append(Token("DEDENT", "", lineno, 1))
            if indent != indents[-1]:
                raise ParseError("unindent does not match any outer level", lineno, 1)
        _tokenize_line(stripped, lineno, tokens)
        tokens.append(Token("NEWLINE", "", lineno, len(stripped) + 1))
    while len(indents) > 1:
        indents.pop()
        tokens.append(Token("DEDENT", "", len(lines) + 1, 1))
    tokens.append(Token("EOF", "", len(lines) + 1, 1))
    return tokens


def _strip_comment(line: str) -> str:
    out = []
    quote = None
    i = 0
    while i < len(line):
        ch = line[i]
        if quote:
            out.append(ch)
            if ch == "\\" and i + 1 < len(line):
                out.append(line[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
            out.append(ch)
        elif ch == "#":
            break
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def _tokenize_line(line: str, lineno: int, tokens: List[Token]):
    i = len(line) - len(line.lstrip(" "))
    n = len(line)
    while i < n:
        ch = line[i]
        col = i + 1
        if ch == " ":
            i += 1
            continue
        if ch.isalpha() or ch == "_" or ch == "$":
            j = i + 1
            while j < n and (line[j].isalnum() or line[j] == "_"):
                j += 1
            word = line[i:j]
            kind = "KEYWORD" if word in KEYWORDS else "NAME"
            tokens.append(Token(kind, word, lineno, col))
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and line[j].isdigit():
                j += 1
            if j < n and line[j] == "." and j + 1 < n and line[j + 1].isdigit():
                j += 1
                while j < n and line[j].isdigit():
                    j += 1
                tokens.append(Token("FLOAT", line[i:j], lineno, col))
            else:
                tokens.append(Token("INT", line[i:j], lineno, col))
            i = j
            continue
        if ch in "'\"":
            j = i + 1
            buf = []
            while j < n and line[j] != ch:
                if line[j] == "\\" and j + 1 < n:
                    esc = line[j + 1]
                    buf.append({"n": "\n", "t": "\t"}.get(esc, esc))
                    j += 2
                else:
                    buf.append(line[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string literal", lineno, col)
            tokens.append(Token("STRING", "".join(buf), lineno, col))
            i = j + 1
            continue
        two = line[i : i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token("OP", two, lineno, col))
            i += 2
            continue
        if ch in _ONE_CHAR:
            tokens.append(Token("OP", ch, lineno, col))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", lineno, col)


# ---------------------------------------------------------------------------
# AST

@dataclass
class Node:
    pass


@dataclass
class ELit(Node):
    value: object
    line: int = field(default=0, compare=False)


@dataclass
class EName(Node):
    id: str
    line: int = field(default=0, compare=False)


@dataclass
class EBin(Node):
    op: str
    left: Node
    right: Node
    line: int = field(default=0, compare=False)


@dataclass
class EUnary(Node):
    op: str  # "not" | "neg"
    operand: Node
    line: int = field(default=0, compare=False)


@dataclass
class ECall(Node):
    fn: str
    args: List[Node]
    line: int = field(default=0, compare=False)


@dataclass
class EIndex(Node):
    obj: Node
    index: Node
    line: int = field(default=0, compare=False)


@dataclass
class ESlice(Node):
    obj: Node
    lo: Optional[Node]
    hi: Optional[Node]
    line: int = field(default=0, compare=False)


@dataclass
class EList(Node):
    elems: List[Node]
    line: int = field(default=0, compare=False)


@dataclass
class SAssign(Node):
    target: str
    value: Node
    line: int = field(default=0, compare=False)


@dataclass
class SIf(Node):
    cond: Node
    then: List[Node]
    orelse: List[Node]
    line: int = field(default=0, compare=False)


@dataclass
class SWhile(Node):
    cond: Node
    body: List[Node]
    line: int = field(default=0, compare=False)


@dataclass
class SForRange(Node):
    var: str
    start: Optional[Node]  # None means 0
    stop: Node
    body: List[Node]
    line: int = field(default=0, compare=False)


@dataclass
class SReturn(Node):
    value: Node
    line: int = field(default=0, compare=False)


@dataclass
class FuncDef(Node):
    name: str
    params: List[str]
    body: List[Node]
    line: int = field(default=0, compare=False)


@dataclass
class SourceUnit:
    text: str
    name: str = "<attempt>"


# ---------------------------------------------------------------------------
# Parser

_COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (value is not None and tok.value != value):
            want = value if value is not None else kind
            raise ParseError(f"expected {want!r}, found {tok.value or tok.kind!r}",
                             tok.line, tok.col)
        return self.next()

    def at(self, kind: str, value: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    # -- top level

    def parse_unit(self) -> FuncDef:
        tok = self.peek()
        if not self.at("KEYWORD", "def"):
            raise ParseError("a file must start with a function definition",
                             tok.line, tok.col)
        fn = self.parse_def()
        tok = self.peek()
        if tok.kind != "EOF":
            if tok.kind == "KEYWORD" and tok.value == "def":
                raise UnsupportedConstructError(
                    "more than one function per file", tok.line, tok.col)
            raise ParseError("unexpected code after the function definition",
                             tok.line, tok.col)
        return fn

    def parse_def(self) -> FuncDef:
        tok = self.expect("KEYWORD", "def")
        name = self.expect("NAME").value
        self.expect("OP", "(")
        params = []
        if not self.at("OP", ")"):
            params.append(self.expect("NAME").value)
            while self.at("OP", ","):
                self.next()
                params.append(self.expect("NAME").value)
        self.expect("OP", ")")
        self.expect("OP", ":")
        self.expect("NEWLINE")
        body = self.parse_block()
        return FuncDef(name, params, body, line=tok.line)

    def parse_block(self) -> List[Node]:
        self.expect("INDENT")
        stmts = []
        while not self.at("DEDENT"):
            stmts.extend(self.parse_statement_line())
        self.expect("DEDENT")
        return stmts

    # -- statements

    def parse_statement_line(self) -> List[Node]:
        first = self.parse_statement()
        if isinstance(first, (SIf, SWhile, SForRange)):
            # compound statements consume their own block; no trailing NEWLINE
            return [first]
        stmts = [first]
        while self.at("OP", ";"):
            self.next()
            if self.at("NEWLINE"):
                break
            stmts.append(self.parse_simple_statement())
        self.expect("NEWLINE")
        return stmts

    def parse_statement(self) -> Node:
        tok = self.peek()
        if tok.kind == "KEYWORD":
            if tok.value == "if":
                return self.parse_if()
            if tok.value == "while":
                return self.parse_while()
            if tok.value == "for":
                return self.parse_for()
            if tok.value == "return":
                return self.parse_return()
            if tok.value in ("elif", "else"):
                raise ParseError(f"{tok.value!r} without a matching 'if'",
                                 tok.line, tok.col)
        return self.parse_simple_statement()

    def parse_simple_statement(self) -> Node:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.value == "return":
            return self.parse_return()
        if tok.kind != "NAME":
            raise ParseError(f"expected a statement, found {tok.value or tok.kind!r}",
                             tok.line, tok.col)
        if tok.value.startswith("$"):
            raise UnsupportedConstructError(
                f"assignment to reserved name {tok.value!r}", tok.line, tok.col)
        name = self.next().value
        op_tok = self.peek()
        if op_tok.kind == "OP" and op_tok.value in ("+=", "-=", "*=", "/="):
            self.next()
            value = self.parse_expr()
            binop = op_tok.value[0]
            return SAssign(name, EBin(binop, EName(name, line=tok.line), value,
                                      line=tok.line), line=tok.line)
        if op_tok.kind == "OP" and op_tok.value == "(":
            raise UnsupportedConstructError(
                f"call statement {name!r} (only assignments call builtins)",
                tok.line, tok.col)
        if op_tok.kind == "OP" and op_tok.value == ".":
            raise UnsupportedConstructError(
                "attribute access / method call", op_tok.line, op_tok.col)
        self.expect("OP", "=")
        value = self.parse_expr()
        return SAssign(name, value, line=tok.line)

    def parse_if(self) -> Node:
        tok = self.expect("KEYWORD", "if")
        cond = self.parse_expr()
        self.expect("OP", ":")
        self.expect("NEWLINE")
        then = self.parse_block()
        orelse: List[Node] = []
        if self.at("KEYWORD", "elif"):
            elif_tok = self.peek()
            self.tokens[self.pos] = Token("KEYWORD", "if", elif_tok.line, elif_tok.col)
            orelse = [self.parse_if()]
        elif self.at("KEYWORD", "else"):
            self.next()
            self.expect("OP", ":")
            self.expect("NEWLINE")
            orelse = self.parse_block()
        return SIf(cond, then, orelse, line=tok.line)

    def parse_while(self) -> Node:
        tok = self.expect("KEYWORD", "while")
        cond = self.parse_expr()
        self.expect("OP", ":")
        self.expect("NEWLINE")
        body = self.parse_block()
        return SWhile(cond, body, line=tok.line)

    def parse_for(self) -> Node:
        tok = self.expect("KEYWORD", "for")
        var = self.expect("NAME").value
        self.expect("KEYWORD", "in")
        callee = self.peek()
        if callee.kind != "NAME" or callee.value != "range":
            raise UnsupportedConstructError(
                "for-loop over something other than range(...)",
                callee.line, callee.col)
        self.next()
        self.expect("OP", "(")
        first = self.parse_expr()
        second = None
        if self.at("OP", ","):
            self.next()
            second = self.parse_expr()
        self.expect("OP", ")")
        self.expect("OP", ":")
        self.expect("NEWLINE")
        body = self.parse_block()
        if second is None:
            return SForRange(var, None, first, body, line=tok.line)
        return SForRange(var, first, second, body, line=tok.line)

    def parse_return(self) -> Node:
        tok = self.expect("KEYWORD", "return")
        value = self.parse_expr()
        return SReturn(value, line=tok.line)

    # -- expressions (precedence climbing)

    def parse_expr(self) -> Node:
        return self.parse_or()

    def parse_or(self) -> Node:
        left = self.parse_and()
        while self.at("KEYWORD", "or"):
            tok = self.next()
            left = EBin("or", left, self.parse_and(), line=tok.line)
        return left

    def parse_and(self) -> Node:
        left = self.parse_not()
        while self.at("KEYWORD", "and"):
            tok = self.next()
            left = EBin("and", left, self.parse_not(), line=tok.line)
        return left

    def parse_not(self) -> Node:
        if self.at("KEYWORD", "not"):
            tok = self.next()
            return EUnary("not", self.parse_not(), line=tok.line)
        return self.parse_comparison()

    def parse_comparison(self) -> Node:
        left = self.parse_additive()
        if self.at("OP") and self.peek().value in _COMPARISONS:
            tok = self.next()
            right = self.parse_additive()
            node = EBin(tok.value, left, right, line=tok.line)
            if self.at("OP") and self.peek().value in _COMPARISONS:
                nxt = self.peek()
                raise UnsupportedConstructError(
                    "chained comparison", nxt.line, nxt.col)
            return node
        return left

    def parse_additive(self) -> Node:
        left = self.parse_multiplicative()
        while self.at("OP") and self.peek().value in ("+", "-"):
            tok = self.next()
            left = EBin(tok.value, left, self.parse_multiplicative(), line=tok.line)
        return left

    def parse_multiplicative(self) -> Node:
        left = self.parse_unary()
        while self.at("OP") and self.peek().value in ("*", "/", "%"):
            tok = self.next()
            left = EBin(tok.value, left, self.parse_unary(), line=tok.line)
        return left

    def parse_unary(self) -> Node:
        if self.at("OP", "-"):
            tok = self.next()
            return EUnary("neg", self.parse_unary(), line=tok.line)
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_postfix()
        if self.at("OP", "**"):
            tok = self.next()
            return EBin("**", base, self.parse_unary(), line=tok.line)
        return base

    def parse_postfix(self) -> Node:
        node = self.parse_atom()
        while True:
            if self.at("OP", "["):
                tok = self.next()
                lo = None
                if not self.at("OP", ":"):
                    lo = self.parse_expr()
                if self.at("OP", ":"):
                    self.next()
                    hi = None
                    if not self.at("OP", "]"):
                        hi = self.parse_expr()
                    self.expect("OP", "]")
                    node = ESlice(node, lo, hi, line=tok.line)
                else:
                    self.expect("OP", "]")
                    node = EIndex(node, lo, line=tok.line)
            elif self.at("OP", "."):
                tok = self.peek()
                raise UnsupportedConstructError(
                    "attribute access / method call", tok.line, tok.col)
            else:
                return node

    def parse_atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "INT":
            self.next()
            return ELit(int(tok.value), line=tok.line)
        if tok.kind == "FLOAT":
            self.next()
            return ELit(float(tok.value), line=tok.line)
        if tok.kind == "STRING":
            self.next()
            return ELit(tok.value, line=tok.line)
        if tok.kind == "KEYWORD" and tok.value in ("True", "False"):
            self.next()
            return ELit(tok.value == "True", line=tok.line)
        if tok.kind == "NAME":
            if tok.value.startswith("$"):
                raise UnsupportedConstructError(
                    f"reserved name {tok.value!r}", tok.line, tok.col)
            self.next()
            if self.at("OP", "("):
                if tok.value not in BUILTIN_FUNCTIONS:
                    raise UnsupportedConstructError(
                        f"call to unknown function {tok.value!r}",
                        tok.line, tok.col)
                self.next()
                args = []
                if not self.at("OP", ")"):
                    args.append(self.parse_expr())
                    while self.at("OP", ","):
                        self.next()
                        args.append(self.parse_expr())
                self.expect("OP", ")")
                return ECall(tok.value, args, line=tok.line)
            return EName(tok.value, line=tok.line)
        if tok.kind == "OP" and tok.value == "(":
            self.next()
            inner = self.parse_expr()
            self.expect("OP", ")")
            return inner
        if tok.kind == "OP" and tok.value == "[":
            self.next()
            elems = []
            if not self.at("OP", "]"):
                elems.append(self.parse_expr())
                while self.at("OP", ","):
                    self.next()
                    elems.append(self.parse_expr())
            self.expect("OP", "]")
            return EList(elems, line=tok.line)
        raise ParseError(f"expected an expression, found {tok.value or tok.kind!r}",
                         tok.line, tok.col)


def parse(src: SourceUnit) -> FuncDef:
    """Parse a source unit into a single function definition."""
    return _Parser(tokenize(src.text)).parse_unit()


def parse_expression(text: str) -> Node:
    """Parse a single expression (test and tooling helper)."""
    tokens = []
    _tokenize_line(text, 1, tokens)
    tokens.append(Token("NEWLINE", "", 1, len(text) + 1))
    tokens.append(Token("EOF", "", 1, len(text) + 1))
    p = _Parser(tokens)
    node = p.parse_expr()
    if not p.at("NEWLINE"):
        tok = p.peek()
        raise ParseError("trailing input after expression", tok.line, tok.col)
    return node


# ---------------------------------------------------------------------------
# Printer

_BIN_PREC = {
    "or": 1, "and": 2,
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6, "%": 6, "**": 8,
}
_UNARY_PREC = {"not": 3, "neg": 7}


def print_expr_ast(node: Node) -> str:
    return _pe(node, 0)


def _pe(node: Node, parent_prec: int) -> str:
    if isinstance(node, ELit):
        return repr(node.value) if isinstance(node.value, str) else str(node.value)
    if isinstance(node, EName):
        return node.id
    if isinstance(node, EBin):
        prec = _BIN_PREC[node.op]
        right_prec = prec if node.op == "**" else prec + 1
        left_prec = prec + 1 if node.op == "**" else prec
        text = f"{_pe(node.left, left_prec)} {node.op} {_pe(node.right, right_prec)}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(node, EUnary):
        prec = _UNARY_PREC[node.op]
        sym = "not " if node.op == "not" else "-"
        text = f"{sym}{_pe(node.operand, prec)}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(node, ECall):
        args = ", ".join(_pe(a, 0) for a in node.args)
        return f"{node.fn}({args})"
    if isinstance(node, EIndex):
        return f"{_pe(node.obj, 9)}[{_pe(node.index, 0)}]"
    if isinstance(node, ESlice):
        lo = _pe(node.lo, 0) if node.lo is not None else ""
        hi = _pe(node.hi, 0) if node.hi is not None else ""
        return f"{_pe(node.obj, 9)}[{lo}:{hi}]"
    if isinstance(node, EList):
        return "[" + ", ".join(_pe(e, 0) for e in node.elems) + "]"
    raise TypeError(f"not an expression node: {node!r}")


def print_source(fn: FuncDef) -> str:
    """Canonical source text; parse(print_source(ast)) is structurally
    identical to ast."""
    lines = [f"def {fn.name}({', '.join(fn.params)}):"]
    _print_block(fn.body, 1, lines)
    return "\n".join(lines) + "\n"


def _print_block(stmts: List[Node], depth: int, lines: List[str]):
    pad = "    " * depth
    if not stmts:
        raise ValueError("cannot print an empty block")
    for s in stmts:
        if isinstance(s, SAssign):
            lines.append(f"{pad}{s.target} = {_pe(s.value, 0)}")
        elif isinstance(s, SReturn):
            lines.append(f"{pad}return {_pe(s.value, 0)}")
        elif isinstance(s, SIf):
            lines.append(f"{pad}if {_pe(s.cond, 0)}:")
            _print_block(s.then, depth + 1, lines)
            if s.orelse:
                lines.append(f"{pad}else:")
                _print_block(s.orelse, depth + 1, lines)
        elif isinstance(s, SWhile):
            lines.append(f"{pad}while {_pe(s.cond, 0)}:")
            _print_block(s.body, depth + 1, lines)
        elif isinstance(s, SForRange):
            if s.start is None:
                header = f"{pad}for {s.var} in range({_pe(s.stop, 0)}):"
            else:
                header = (f"{pad}for {s.var} in "
                          f"range({_pe(s.start, 0)}, {_pe(s.stop, 0)}):")
            lines.append(header)
            _print_block(s.body, depth + 1, lines)
        else:
            raise TypeError(f"not a statement: {s!r}")
