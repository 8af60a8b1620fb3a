"""Syntax for the small pointer language the analysis runs on.

Programs manipulate heap pointers through variables and single field
dereferences:

    cur = head;
    while (cur != null) {
        Node tmp = cur.next;    // a leading type name is allowed and ignored
        cur.next = cur.prev;
        cur.prev = tmp;
        cur = tmp;
    }

Statements are ``x = P``, ``x.f = P``, ``new(x)``, ``skip``, sequencing,
``if``/``else`` and ``while``; pointer expressions are ``null``, ``x`` and
``x.f``; conditions compare pointers with ``==``/``!=`` and combine with
``&&``, ``!`` and parentheses.  ``//`` starts a line comment.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import IgshapeError

__all__ = [
    "ProgramError",
    "Null",
    "Var",
    "Field",
    "Eq",
    "And",
    "Not",
    "Skip",
    "Assign",
    "FieldAssign",
    "New",
    "Seq",
    "If",
    "While",
    "Assume",
    "parse_program",
    "to_text",
    "ControlFlow",
    "build_cfg",
]


class ProgramError(IgshapeError):
    code = "bad-program"


# Pointer expressions.


@dataclass(frozen=True)
class Null:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Field:
    var: str
    field: str


# Conditions.  ``!=`` is parsed as negated equality.


@dataclass(frozen=True)
class Eq:
    left: Null | Var | Field
    right: Null | Var | Field


@dataclass(frozen=True)
class And:
    left: "BExpr"
    right: "BExpr"


@dataclass(frozen=True)
class Not:
    operand: "BExpr"


BExpr = Eq | And | Not
PExpr = Null | Var | Field


# Statements.


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    var: str
    value: PExpr


@dataclass(frozen=True)
class FieldAssign:
    var: str
    field: str
    value: PExpr


@dataclass(frozen=True)
class New:
    var: str


@dataclass(frozen=True)
class Seq:
    body: tuple["Stmt", ...]


@dataclass(frozen=True)
class If:
    cond: BExpr
    then: "Stmt"
    orelse: "Stmt"


@dataclass(frozen=True)
class While:
    cond: BExpr
    body: "Stmt"


Stmt = Skip | Assign | FieldAssign | New | Seq | If | While

Atomic = Skip | Assign | FieldAssign | New


@dataclass(frozen=True)
class Assume:
    """Control-flow guard: the edge is taken only when the condition holds."""

    cond: BExpr


_PUNCT = ("==", "!=", "&&", "(", ")", "{", "}", ";", ".", "=", "!")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    line = 1
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            i = len(text) if end < 0 else end
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], line))
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                tokens.append(("punct", p, line))
                i += len(p)
                break
        else:
            raise ProgramError(f"line {line}: unexpected character {c!r}")
    tokens.append(("eof", "", line))
    return tokens


_KEYWORDS = {"while", "if", "else", "null", "new", "skip"}


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> tuple[str, str, int]:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def take(self, value: str | None = None) -> tuple[str, str, int]:
        kind, val, line = self.tokens[self.pos]
        if value is not None and val != value:
            shown = val if kind != "eof" else "end of input"
            raise ProgramError(f"line {line}: expected {value!r}, got {shown!r}")
        self.pos += 1
        return kind, val, line

    def ident(self) -> str:
        kind, val, line = self.take()
        if kind != "ident" or val in _KEYWORDS:
            raise ProgramError(f"line {line}: expected a name, got {val!r}")
        return val

    def program(self) -> Stmt:
        body = []
        while self.peek()[0] != "eof":
            body.append(self.statement())
        return body[0] if len(body) == 1 else Seq(tuple(body))

    def block(self) -> Stmt:
        if self.peek()[1] == "{":
            self.take("{")
            body = []
            while self.peek()[1] != "}":
                if self.peek()[0] == "eof":
                    raise ProgramError(f"line {self.peek()[2]}: unclosed block")
                body.append(self.statement())
            self.take("}")
            return body[0] if len(body) == 1 else Seq(tuple(body))
        return self.statement()

    def statement(self) -> Stmt:
        kind, val, line = self.peek()
        if val == "while":
            self.take()
            self.take("(")
            cond = self.bexpr()
            self.take(")")
            return While(cond, self.block())
        if val == "if":
            self.take()
            self.take("(")
            cond = self.bexpr()
            self.take(")")
            then = self.block()
            orelse: Stmt = Skip()
            if self.peek()[1] == "else":
                self.take()
                orelse = self.block()
            return If(cond, then, orelse)
        if val == "skip":
            self.take()
            self.take(";")
            return Skip()
        if val == "new":
            self.take()
            self.take("(")
            var = self.ident()
            self.take(")")
            self.take(";")
            return New(var)
        if kind != "ident" or val in _KEYWORDS:
            raise ProgramError(f"line {line}: expected a statement, got {val!r}")
        # A declaration is a type name followed by the variable proper.
        if self.peek(1)[0] == "ident" and self.peek(1)[1] not in _KEYWORDS:
            self.take()
        var = self.ident()
        if self.peek()[1] == ".":
            self.take(".")
            fld = self.ident()
            self.take("=")
            value = self.pexpr()
            self.take(";")
            return FieldAssign(var, fld, value)
        self.take("=")
        value = self.pexpr()
        self.take(";")
        return Assign(var, value)

    def pexpr(self) -> PExpr:
        kind, val, line = self.take()
        if val == "null":
            return Null()
        if kind != "ident" or val in _KEYWORDS:
            raise ProgramError(f"line {line}: expected a pointer expression, got {val!r}")
        if self.peek()[1] == ".":
            self.take(".")
            return Field(val, self.ident())
        return Var(val)

    def bexpr(self) -> BExpr:
        left = self.bunary()
        while self.peek()[1] == "&&":
            self.take()
            left = And(left, self.bunary())
        return left

    def bunary(self) -> BExpr:
        kind, val, _ = self.peek()
        if val == "!":
            self.take()
            return Not(self.bunary())
        if val == "(":
            self.take()
            inner = self.bexpr()
            self.take(")")
            return inner
        left = self.pexpr()
        _, op, line = self.take()
        if op == "==":
            return Eq(left, self.pexpr())
        if op == "!=":
            return Not(Eq(left, self.pexpr()))
        raise ProgramError(f"line {line}: expected a comparison, got {op!r}")


def parse_program(text: str) -> Stmt:
    return _Parser(text).program()


def to_text(node) -> str:
    """Source-like rendering of any syntax node, used in reports and DOT."""
    match node:
        case Null():
            return "null"
        case Var(name):
            return name
        case Field(var, fld):
            return f"{var}.{fld}"
        case Not(Eq(left, right)):
            return f"{to_text(left)} != {to_text(right)}"
        case Eq(left, right):
            return f"{to_text(left)} == {to_text(right)}"
        case And(left, right):
            return f"{to_text(left)} && {to_text(right)}"
        case Not(operand):
            return f"!({to_text(operand)})"
        case Skip():
            return "skip;"
        case Assign(var, value):
            return f"{var} = {to_text(value)};"
        case FieldAssign(var, fld, value):
            return f"{var}.{fld} = {to_text(value)};"
        case New(var):
            return f"new({var});"
        case Assume(cond):
            return f"assume({to_text(cond)})"
        case Seq(body):
            return " ".join(to_text(s) for s in body)
        case If(cond, then, orelse):
            txt = f"if ({to_text(cond)}) {{ {to_text(then)} }}"
            if orelse != Skip():
                txt += f" else {{ {to_text(orelse)} }}"
            return txt
        case While(cond, body):
            return f"while ({to_text(cond)}) {{ {to_text(body)} }}"
    raise TypeError(f"not a syntax node: {node!r}")


@dataclass
class ControlFlow:
    """Flow graph with atomic commands and guards on the edges.

    Locations are dense integers; ``entry`` is 0 and ``exit`` has no
    outgoing edges.  Every edge label is either an atomic statement or an
    ``Assume`` guard.
    """

    entry: int
    exit: int
    edges: list[tuple[int, Atomic | Assume, int]]

    def outgoing(self, loc: int):
        return [(lab, dst) for src, lab, dst in self.edges if src == loc]


def build_cfg(stmt: Stmt) -> ControlFlow:
    edges: list[tuple[int, Atomic | Assume, int]] = []
    counter = [0]

    def fresh() -> int:
        counter[0] += 1
        return counter[0]

    def wire(s: Stmt, src: int, dst: int):
        match s:
            case Seq(body):
                if not body:
                    edges.append((src, Skip(), dst))
                    return
                cur = src
                for part in body[:-1]:
                    nxt = fresh()
                    wire(part, cur, nxt)
                    cur = nxt
                wire(body[-1], cur, dst)
            case If(cond, then, orelse):
                t, e = fresh(), fresh()
                edges.append((src, Assume(cond), t))
                edges.append((src, Assume(Not(cond)), e))
                wire(then, t, dst)
                wire(orelse, e, dst)
            case While(cond, body):
                b = fresh()
                edges.append((src, Assume(cond), b))
                edges.append((src, Assume(Not(cond)), dst))
                wire(body, b, src)
            case Skip() | Assign() | FieldAssign() | New():
                edges.append((src, s, dst))
            case _:
                raise TypeError(f"not a statement: {s!r}")

    exit_loc = fresh()
    wire(stmt, 0, exit_loc)
    return ControlFlow(0, exit_loc, edges)
