"""Typed repair propositions and the boolean circuits built over them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .formula import Formula

# --- propositions ---------------------------------------------------------------


class PropVar:
    """A proposition of the repair formula.  Subclasses are frozen dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class EdgeVar(PropVar):
    """Transition ``(s, t)`` is retained."""
    s: str
    t: str

    def __str__(self):
        return f"E({self.s},{self.t})"


@dataclass(frozen=True)
class SatVar(PropVar):
    """Formula ``f`` holds at state ``s``."""
    s: str
    f: Formula

    def __str__(self):
        return f"X({self.s},{self.f.text})"


@dataclass(frozen=True)
class LevelVar(PropVar):
    """Level-``m`` approximation of a release formula at ``s``."""
    s: str
    f: Formula
    m: int

    def __str__(self):
        return f"X{self.m}({self.s},{self.f.text})"


@dataclass(frozen=True)
class NodeVar(PropVar):
    """State ``s`` is retained."""
    s: str

    def __str__(self):
        return f"N({self.s})"


@dataclass(frozen=True)
class ReachLevelVar(PropVar):
    """``s`` is reachable from the initial state in at most ``m`` retained steps."""
    s: str
    m: int

    def __str__(self):
        return f"R{self.m}({self.s})"


@dataclass(frozen=True)
class ReachVar(PropVar):
    s: str

    def __str__(self):
        return f"R({self.s})"


# --- expressions ----------------------------------------------------------------


class Expr:
    """Immutable circuit node.

    ``op`` is one of ``const``, ``var``, ``not``, ``and``, ``or``, ``iff``.
    Use the module-level constructors, which fold constants.
    """

    __slots__ = ("op", "args", "_hash")

    def __init__(self, op: str, args: tuple):
        self.op = op
        self.args = args
        self._hash = hash((op, args))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        return type(other) is Expr and self._hash == other._hash and self.op == other.op and self.args == other.args

    def __repr__(self):
        return f"Expr({to_text(self)})"

    def __str__(self):
        return to_text(self)

    def __and__(self, other):
        return conj(self, other)

    def __or__(self, other):
        return disj(self, other)

    def __invert__(self):
        return neg(self)


# the only constant nodes; constructors compare against them by identity
TRUE = Expr("const", (True,))
FALSE = Expr("const", (False,))


def const(value: bool) -> Expr:
    return TRUE if value else FALSE


def var(p: PropVar) -> Expr:
    return Expr("var", (p,))


def neg(a: Expr) -> Expr:
    if a.op == "const":
        return const(not a.args[0])
    if a.op == "not":
        return a.args[0]
    return Expr("not", (a,))


def conj(*items: Expr | Iterable[Expr]) -> Expr:
    kids = []
    for x in _flatten_args(items):
        if x is FALSE:
            return FALSE
        if x is TRUE:
            continue
        kids.append(x)
    if not kids:
        return TRUE
    if len(kids) == 1:
        return kids[0]
    return Expr("and", tuple(kids))


def disj(*items: Expr | Iterable[Expr]) -> Expr:
    kids = []
    for x in _flatten_args(items):
        if x is TRUE:
            return TRUE
        if x is FALSE:
            continue
        kids.append(x)
    if not kids:
        return FALSE
    if len(kids) == 1:
        return kids[0]
    return Expr("or", tuple(kids))


def implies(a: Expr, b: Expr) -> Expr:
    return disj(neg(a), b)


def iff(a: Expr, b: Expr) -> Expr:
    if a.op == "const":
        return b if a.args[0] else neg(b)
    if b.op == "const":
        return a if b.args[0] else neg(a)
    return Expr("iff", (a, b))


def _flatten_args(items):
    if len(items) == 1 and not isinstance(items[0], Expr):
        return items[0]
    if all(isinstance(x, Expr) for x in items):
        return items
    out = []
    for x in items:
        if isinstance(x, Expr):
            out.append(x)
        else:
            out.extend(x)
    return out


# --- inspection -----------------------------------------------------------------


def walk(e: Expr) -> Iterator[Expr]:
    """Every distinct node reachable from ``e`` (pre-order, children left to right)."""
    seen = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        yield n
        if n.op in ("not", "and", "or", "iff"):
            stack.extend(reversed(n.args))


def variables(e: Expr) -> list[PropVar]:
    out = {}
    for n in walk(e):
        if n.op == "var":
            out.setdefault(n.args[0], None)
    return list(out)


def size(e: Expr) -> int:
    """Nodes plus edges of the DAG; the measure used for the size bound."""
    seen: set[Expr] = set()
    total = 0
    stack = [e]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        total += 1
        if n.op in ("not", "and", "or", "iff"):
            total += len(n.args)
            stack.extend(n.args)
    return total


def evaluate(e: Expr, value) -> bool:
    """Evaluate under ``value``: a mapping or callable from PropVar to bool."""
    get = value if callable(value) else value.__getitem__
    memo: dict[int, bool] = {}

    def go(n: Expr) -> bool:
        k = id(n)
        if k in memo:
            return memo[k]
        op = n.op
        if op == "const":
            r = n.args[0]
        elif op == "var":
            r = bool(get(n.args[0]))
        elif op == "not":
            r = not go(n.args[0])
        elif op == "and":
            r = all(go(c) for c in n.args)
        elif op == "or":
            r = any(go(c) for c in n.args)
        else:
            r = go(n.args[0]) == go(n.args[1])
        memo[k] = r
        return r

    return go(e)


def to_text(e: Expr) -> str:
    op = e.op
    if op == "const":
        return "true" if e.args[0] else "false"
    if op == "var":
        return str(e.args[0])
    if op == "not":
        return "~" + to_text(e.args[0])
    if op == "iff":
        return f"({to_text(e.args[0])} <-> {to_text(e.args[1])})"
    sep = " & " if op == "and" else " | "
    return "(" + sep.join(to_text(c) for c in e.args) + ")"
