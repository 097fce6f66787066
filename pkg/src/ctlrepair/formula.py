"""CTL and ATL formula ASTs, concrete syntax, desugaring and closure.

Core CTL: true, false, p, ~, &, |, AX, EX, A[f V g], E[f V g].
Core ATL: true, false, p, ~, &, |, <<A>>X f, <<A>>[f V g].
Everything else (U, F, G, ->) is sugar removed by :func:`desugar` /
:func:`atl_desugar`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from functools import cached_property
from typing import Iterable


class FormulaError(ValueError):
    pass


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class Formula:
    """Base class; subclasses are frozen dataclasses and compare structurally."""

    children: tuple["Formula", ...] = ()

    def __str__(self) -> str:
        return to_text(self)

    @cached_property
    def height(self) -> int:
        return 1 + max((c.height for c in self.children), default=0)

    @cached_property
    def text(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Formula):
    value: bool


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class _Unary(Formula):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class _Binary(Formula):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


class Not(_Unary): pass
class And(_Binary): pass
class Or(_Binary): pass
class Implies(_Binary): pass
class AX(_Unary): pass
class EX(_Unary): pass
class AF(_Unary): pass
class EF(_Unary): pass
class AG(_Unary): pass
class EG(_Unary): pass
class AU(_Binary): pass
class EU(_Binary): pass
class AV(_Binary): pass
class EV(_Binary): pass


for _cls in (Not, And, Or, Implies, AX, EX, AF, EF, AG, EG, AU, EU, AV, EV):
    dataclass(frozen=True)(_cls)


@dataclass(frozen=True)
class _Coalition(Formula):
    agents: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "agents", frozenset(self.agents))


@dataclass(frozen=True)
class CoalX(_Coalition):
    arg: Formula

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class CoalF(CoalX): pass


@dataclass(frozen=True)
class CoalG(CoalX): pass


@dataclass(frozen=True)
class CoalV(_Coalition):
    left: Formula
    right: Formula

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class CoalU(CoalV): pass


def _cached_hash(self) -> int:
    # formulas are hashed constantly as dict keys; nested dataclass hashing is O(size)
    h = self.__dict__.get("_hash")
    if h is None:
        h = hash((type(self).__name__,) + tuple(getattr(self, f.name) for f in fields(self)))
        self.__dict__["_hash"] = h
    return h


for _cls in (Const, Prop, Not, And, Or, Implies, AX, EX, AF, EF, AG, EG, AU, EU, AV, EV,
             CoalX, CoalF, CoalG, CoalV, CoalU):
    _cls.__hash__ = _cached_hash

CTL_CORE = (Const, Prop, Not, And, Or, AX, EX, AV, EV)
ATL_CORE = (Const, Prop, Not, And, Or, CoalX, CoalV)
_CTL_ALL = CTL_CORE + (Implies, AF, EF, AG, EG, AU, EU)
_ATL_ALL = (Const, Prop, Not, And, Or, Implies, CoalX, CoalV)

# --- printing -------------------------------------------------------------------

_PREFIX = {AX: "AX", EX: "EX", AF: "AF", EF: "EF", AG: "AG", EG: "EG"}
_PATH = {AU: ("A", "U"), EU: ("E", "U"), AV: ("A", "V"), EV: ("E", "V")}
_INFIX = {And: "&", Or: "|", Implies: "->"}
_COAL_UNARY = {CoalF: "F", CoalG: "G", CoalX: "X"}


def _agents(a: Iterable[str]) -> str:
    return "<<" + ",".join(sorted(a)) + ">>"


def to_text(f: Formula) -> str:
    """Canonical concrete syntax; binary connectives are always parenthesised."""
    t = type(f)
    if t is Const:
        return "true" if f.value else "false"
    if t is Prop:
        return f.name
    if t is Not:
        return "~" + to_text(f.arg)
    if t in _INFIX:
        return f"({to_text(f.left)} {_INFIX[t]} {to_text(f.right)})"
    if t in _PREFIX:
        return f"{_PREFIX[t]} {to_text(f.arg)}"
    if t in _PATH:
        q, op = _PATH[t]
        return f"{q}[{to_text(f.left)} {op} {to_text(f.right)}]"
    if t in _COAL_UNARY:
        return f"{_agents(f.agents)}{_COAL_UNARY[t]} {to_text(f.arg)}"
    if t in (CoalV, CoalU):
        op = "V" if t is CoalV else "U"
        return f"{_agents(f.agents)}[{to_text(f.left)} {op} {to_text(f.right)}]"
    raise TypeError(f"not a formula: {f!r}")


# --- parsing --------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<ident>[A-Za-z0-9_][A-Za-z0-9_']*(?:=[A-Za-z0-9_]+)?)"
    r"|(?P<op><<|>>|->|[~&|()\[\],!])"
    r"|(?P<bad>\S))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        for m in _TOKEN.finditer(text):
            if m.group("bad"):
                self._fail(f"unexpected character {m.group('bad')!r}", m.start("bad"))
            kind = "ident" if m.group("ident") else "op"
            self.tokens.append((kind, m.group(kind), m.start(kind)))
        self.pos = 0

    def _fail(self, msg: str, offset: int):
        line = self.text.count("\n", 0, offset) + 1
        col = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        raise FormulaSyntaxError(msg, line, col)

    def peek(self, k: int = 0):
        i = self.pos + k
        return self.tokens[i] if i < len(self.tokens) else (None, None, len(self.text))

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, v, off = self.next()
        if v != value:
            self._fail(f"expected {value!r}, found {v!r}" if v else f"expected {value!r} at end of input", off)

    def parse(self) -> Formula:
        if not self.tokens:
            self._fail("empty formula", 0)
        f = self.implies()
        kind, v, off = self.peek()
        if kind is not None:
            self._fail(f"unexpected {v!r}", off)
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek()[1] == "->":
            self.next()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek()[1] == "|":
            self.next()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.peek()[1] == "&":
            self.next()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        kind, v, off = self.peek()
        if v in ("~", "!"):
            self.next()
            return Not(self.unary())
        if kind == "ident":
            if v in ("AX", "EX", "AF", "EF", "AG", "EG"):
                self.next()
                cls = {"AX": AX, "EX": EX, "AF": AF, "EF": EF, "AG": AG, "EG": EG}[v]
                return cls(self.unary())
            if v in ("A", "E") and self.peek(1)[1] == "[":
                self.next()
                self.next()
                left = self.implies()
                _, op, op_off = self.next()
                if op not in ("U", "V"):
                    self._fail("expected 'U' or 'V'", op_off)
                right = self.implies()
                self.expect("]")
                return {("A", "U"): AU, ("E", "U"): EU, ("A", "V"): AV, ("E", "V"): EV}[(v, op)](left, right)
            self.next()
            if v == "true":
                return TRUE
            if v == "false":
                return FALSE
            return Prop(v)
        if v == "<<":
            return self.coalition()
        if v == "(":
            self.next()
            f = self.implies()
            self.expect(")")
            return f
        self._fail(f"unexpected {v!r}" if v else "unexpected end of input", off)

    def coalition(self) -> Formula:
        self.expect("<<")
        agents = []
        while self.peek()[1] != ">>":
            kind, v, off = self.next()
            if kind != "ident":
                self._fail("expected player name", off)
            agents.append(v)
            if self.peek()[1] == ",":
                self.next()
        self.expect(">>")
        kind, v, off = self.peek()
        if v == "[":
            self.next()
            left = self.implies()
            _, op, op_off = self.next()
            if op not in ("U", "V"):
                self._fail("expected 'U' or 'V'", op_off)
            right = self.implies()
            self.expect("]")
            return (CoalU if op == "U" else CoalV)(frozenset(agents), left, right)
        if v in ("X", "F", "G"):
            self.next()
            return {"X": CoalX, "F": CoalF, "G": CoalG}[v](frozenset(agents), self.unary())
        self._fail("expected 'X', 'F', 'G' or '[' after coalition", off)


def parse(text: str) -> Formula:
    """Parse either logic; mixing CTL path quantifiers and coalitions is rejected."""
    f = _Parser(text).parse()
    kinds = {type(g) for g in walk(f)}
    if kinds & {AX, EX, AF, EF, AG, EG, AU, EU, AV, EV} and kinds & {CoalX, CoalF, CoalG, CoalV, CoalU}:
        raise FormulaError("formula mixes CTL path quantifiers with ATL coalitions")
    return f


def parse_ctl(text: str) -> Formula:
    f = _Parser(text).parse()
    for g in walk(f):
        if not isinstance(g, _CTL_ALL):
            raise FormulaError(f"not a CTL formula: contains {to_text(g)}")
    return f


def parse_atl(text: str) -> Formula:
    f = _Parser(text).parse()
    for g in walk(f):
        if not isinstance(g, _ATL_ALL):
            raise FormulaError(f"not an ATL formula: contains {to_text(g)}")
    return f


def walk(f: Formula):
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(g.children)


def is_ctl(f: Formula) -> bool:
    return all(isinstance(g, _CTL_ALL) for g in walk(f))


def is_atl(f: Formula) -> bool:
    return all(isinstance(g, _ATL_ALL) for g in walk(f))


def is_core(f: Formula) -> bool:
    return all(type(g) in CTL_CORE for g in walk(f)) or all(type(g) in ATL_CORE for g in walk(f))


def props(f: Formula) -> set[str]:
    return {g.name for g in walk(f) if isinstance(g, Prop)}


# --- desugaring -----------------------------------------------------------------


def _neg(f: Formula) -> Formula:
    if isinstance(f, Const):
        return Const(not f.value)
    return Not(f)


def desugar(f: Formula) -> Formula:
    """Rewrite CTL sugar into the core grammar (no NNF; negation is kept)."""
    t = type(f)
    if t in (Const, Prop):
        return f
    if t is Not:
        return Not(desugar(f.arg))
    if t is And:
        return And(desugar(f.left), desugar(f.right))
    if t is Or:
        return Or(desugar(f.left), desugar(f.right))
    if t is Implies:
        return Or(Not(desugar(f.left)), desugar(f.right))
    if t is AX:
        return AX(desugar(f.arg))
    if t is EX:
        return EX(desugar(f.arg))
    if t is AV:
        return AV(desugar(f.left), desugar(f.right))
    if t is EV:
        return EV(desugar(f.left), desugar(f.right))
    if t is AU:
        return Not(EV(_neg(desugar(f.left)), _neg(desugar(f.right))))
    if t is EU:
        return Not(AV(_neg(desugar(f.left)), _neg(desugar(f.right))))
    if t is AF:
        return desugar(AU(TRUE, f.arg))
    if t is EF:
        return desugar(EU(TRUE, f.arg))
    if t is AG:
        return AV(FALSE, desugar(f.arg))
    if t is EG:
        return EV(FALSE, desugar(f.arg))
    raise FormulaError(f"not a CTL formula: {to_text(f)}")


def atl_desugar(f: Formula, players: Iterable[str]) -> Formula:
    """Rewrite ATL sugar; until uses the turn-based determinacy duality."""
    sigma = frozenset(players)

    def go(g: Formula) -> Formula:
        t = type(g)
        if isinstance(g, _Coalition) and not g.agents <= sigma:
            raise FormulaError(f"coalition {sorted(g.agents)} is not a subset of players {sorted(sigma)}")
        if t in (Const, Prop):
            return g
        if t is Not:
            return Not(go(g.arg))
        if t is And:
            return And(go(g.left), go(g.right))
        if t is Or:
            return Or(go(g.left), go(g.right))
        if t is Implies:
            return Or(Not(go(g.left)), go(g.right))
        if t is CoalX:
            return CoalX(g.agents, go(g.arg))
        if t is CoalV:
            return CoalV(g.agents, go(g.left), go(g.right))
        if t is CoalU:
            return Not(CoalV(sigma - g.agents, _neg(go(g.left)), _neg(go(g.right))))
        if t is CoalF:
            return go(CoalU(g.agents, TRUE, g.arg))
        if t is CoalG:
            return CoalV(g.agents, FALSE, go(g.arg))
        raise FormulaError(f"not an ATL formula: {to_text(g)}")

    return go(f)


# --- closure --------------------------------------------------------------------


def _order(fs: Iterable[Formula]) -> tuple[Formula, ...]:
    return tuple(sorted(fs, key=lambda g: (g.height, g.text)))


def sub(f: Formula) -> tuple[Formula, ...]:
    """Sub-formula closure, including the release expansion formulas.

    Works for core CTL and core ATL.  Ordered inner-before-outer, ties
    broken by printed form.
    """
    out: set[Formula] = set()

    def go(g: Formula):
        if g in out:
            return
        t = type(g)
        out.add(g)
        if t in (AV, EV, CoalV):
            nxt = {AV: AX, EV: EX}.get(t)
            step = nxt(g) if nxt else CoalX(g.agents, g)
            disj = Or(g.left, step)
            out.update((step, disj, And(g.right, disj)))
        elif t not in (Const, Prop, Not, And, Or, AX, EX, CoalX):
            raise FormulaError(f"closure needs a core formula, got {to_text(g)}")
        for c in g.children:
            go(c)

    go(f)
    return _order(out)


atl_sub = sub
