"""Compile a repair instance into a boolean circuit.

The circuit is kept as named groups of conjuncts so that extension
constraints (uncontrollable edges, state deletion, symmetry, transition
families, custom formulas) can be conjoined or substituted afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import circuit as C
from .circuit import (
    EdgeVar, Expr, LevelVar, NodeVar, PropVar, ReachLevelVar, ReachVar, SatVar,
)
from .formula import (
    ATL_CORE, AV, AX, CTL_CORE, EV, EX, And, CoalV, CoalX, Const, Formula, Not, Or,
    Prop, props, sub, walk,
)
from .kripke import Edge, GameStructure, KripkeStructure, is_total, validate, validate_game


class EncodingError(ValueError):
    pass


@dataclass
class Encoding:
    """A repair formula under construction.

    ``groups`` maps a group name to its conjuncts, in insertion order;
    ``variables`` records every declared proposition in declaration order,
    which is also the order of the CNF numbering.
    """

    structure: KripkeStructure
    formula: Formula | None
    groups: dict[str, list[Expr]] = field(default_factory=dict)
    variables: dict[PropVar, Expr] = field(default_factory=dict)
    game: GameStructure | None = None

    def var(self, p: PropVar) -> Expr:
        e = self.variables.get(p)
        if e is None:
            e = self.variables[p] = C.var(p)
        return e

    def edge(self, s: str, t: str) -> Expr:
        return self.var(EdgeVar(s, t))

    def add(self, group: str, *conjuncts: Expr) -> None:
        self.groups.setdefault(group, []).extend(conjuncts)

    @property
    def expr(self) -> Expr:
        return C.conj(c for cs in self.groups.values() for c in cs)

    def conjuncts(self):
        for name, cs in self.groups.items():
            for c in cs:
                yield name, c

    def copy(self) -> "Encoding":
        return Encoding(self.structure, self.formula, {k: list(v) for k, v in self.groups.items()},
                        dict(self.variables), self.game)

    def edge_vars(self) -> list[EdgeVar]:
        return [EdgeVar(s, t) for s, t in self.structure.sorted_edges()]

    def dump(self) -> str:
        """One conjunct per line, ``<group>: <expr>``, in deterministic order."""
        return "".join(f"{name}: {C.to_text(c)}\n" for name, c in self.conjuncts())

    def size(self) -> int:
        return C.size(self.expr)


def _check_instance(m: KripkeStructure, eta: Formula, core: tuple) -> None:
    problems = validate(m)
    if problems:
        raise EncodingError("invalid structure: " + "; ".join(problems))
    if not is_total(m):
        raise EncodingError("structure is not total")
    for g in walk(eta):
        if type(g) not in core:
            raise EncodingError(f"formula is not in core form: {g.text}")
    unknown = props(eta) - m.ap
    if unknown:
        raise EncodingError(f"unknown propositions: {sorted(unknown)}")


def _common(enc: Encoding, eta: Formula) -> list[Formula]:
    """Goal, totality, labelling and propositional consistency groups."""
    m = enc.structure
    states = m.sorted_states()
    X = lambda s, f: enc.var(SatVar(s, f))  # noqa: E731
    # declare edges first so they lead the CNF numbering
    for s, t in m.sorted_edges():
        enc.edge(s, t)
    enc.add("goal", X(m.initial, eta))
    for s in states:
        enc.add("total", C.disj(enc.edge(s, t) for t in m.successors(s)))
    closure = list(sub(eta))
    for s in states:
        for p in sorted(m.ap):
            x = X(s, Prop(p))
            enc.add("label", x if p in m.labels[s] else C.neg(x))
        for f in closure:
            if type(f) is Const:
                x = X(s, f)
                enc.add("label", x if f.value else C.neg(x))
    for f in closure:
        t = type(f)
        for s in states:
            if t is Not:
                enc.add("consistency", C.iff(X(s, f), C.neg(X(s, f.arg))))
            elif t is And:
                enc.add("consistency", C.iff(X(s, f), C.conj(X(s, f.left), X(s, f.right))))
            elif t is Or:
                enc.add("consistency", C.iff(X(s, f), C.disj(X(s, f.left), X(s, f.right))))
    return closure


def _universal(enc: Encoding, s: str, target: Callable[[str], Expr]) -> Expr:
    m = enc.structure
    return C.conj(C.implies(enc.edge(s, t), target(t)) for t in m.successors(s))


def _existential(enc: Encoding, s: str, target: Callable[[str], Expr]) -> Expr:
    m = enc.structure
    return C.disj(C.conj(enc.edge(s, t), target(t)) for t in m.successors(s))


def _release(enc: Encoding, f: Formula, step_of: Callable[[str], Callable]) -> None:
    """Level-indexed release recurrence for ``f`` (any release form)."""
    m = enc.structure
    n = len(m.states)
    states = m.sorted_states()
    X = lambda s, g: enc.var(SatVar(s, g))  # noqa: E731
    L = lambda s, k: enc.var(LevelVar(s, f, k))  # noqa: E731
    for s in states:
        enc.add("release", C.iff(X(s, f), L(s, n)))
    for k in range(1, n + 1):
        for s in states:
            step = step_of(s)(enc, s, lambda t, k=k: L(t, k - 1))
            body = C.conj(X(s, f.right), C.disj(X(s, f.left), step))
            enc.add("release", C.iff(L(s, k), body))
    for s in states:
        enc.add("release", C.iff(L(s, 0), X(s, f.right)))


def encode_ctl_repair(m: KripkeStructure, eta: Formula) -> Encoding:
    """Repair formula of a total Kripke structure against a core CTL formula."""
    _check_instance(m, eta, CTL_CORE)
    enc = Encoding(m, eta)
    closure = _common(enc, eta)
    X = lambda s, g: enc.var(SatVar(s, g))  # noqa: E731
    states = m.sorted_states()
    for f in closure:
        t = type(f)
        if t is AX:
            for s in states:
                enc.add("next", C.iff(X(s, f), _universal(enc, s, lambda u: X(u, f.arg))))
        elif t is EX:
            for s in states:
                enc.add("next", C.iff(X(s, f), _existential(enc, s, lambda u: X(u, f.arg))))
    for f in closure:
        if type(f) is AV:
            _release(enc, f, lambda s: _universal)
        elif type(f) is EV:
            _release(enc, f, lambda s: _existential)
    return enc


def encode_atl_repair(g: GameStructure, eta: Formula) -> Encoding:
    """Repair formula of a turn-based game against a core ATL formula.

    At a state owned by a coalition member the coalition picks a retained
    successor; elsewhere every retained successor must do.
    """
    problems = validate_game(g)
    if problems:
        raise EncodingError("invalid game structure: " + "; ".join(problems))
    m = g.base
    _check_instance(m, eta, ATL_CORE)
    for h in walk(eta):
        if isinstance(h, (CoalX, CoalV)) and not h.agents <= g.players:
            raise EncodingError(f"coalition {sorted(h.agents)} is not a subset of the players")
    enc = Encoding(m, eta, game=g)
    closure = _common(enc, eta)
    X = lambda s, h: enc.var(SatVar(s, h))  # noqa: E731

    def mode(agents):
        return lambda s: _existential if g.turn[s] in agents else _universal

    for f in closure:
        if type(f) is CoalX:
            pick = mode(f.agents)
            for s in m.sorted_states():
                enc.add("next", C.iff(X(s, f), pick(s)(enc, s, lambda u: X(u, f.arg))))
    for f in closure:
        if type(f) is CoalV:
            _release(enc, f, mode(f.agents))
    return enc


# --- extension constraints ------------------------------------------------------


def encode_reachability(enc: Encoding) -> Encoding:
    """Conjoin the exact reachability propositions ``R(s)``.

    ``R0(s)`` holds only at the initial state and ``Rk(s)`` is the
    one-step closure of level ``k-1`` along retained edges; every level is
    a biconditional so reachability is functionally determined by the edges.
    """
    if "reach" in enc.groups:
        return enc
    m = enc.structure
    n = len(m.states)
    states = m.sorted_states()
    R = lambda s, k: enc.var(ReachLevelVar(s, k))  # noqa: E731
    for s in states:
        r0 = R(s, 0)
        enc.add("reach", r0 if s == m.initial else C.neg(r0))
    for k in range(1, n + 1):
        for s in states:
            into = [C.conj(R(t, k - 1), enc.edge(t, s)) for t in m.predecessors(s)]
            enc.add("reach", C.iff(R(s, k), C.disj(R(s, k - 1), C.disj(into))))
    for s in states:
        enc.add("reach", C.iff(enc.var(ReachVar(s)), R(s, n)))
    return enc


def _check_edges(m: KripkeStructure, edges: Iterable[Edge], what: str) -> list[Edge]:
    out = []
    for e in edges:
        e = tuple(e)
        if e not in m.transitions:
            raise EncodingError(f"{what} {e} is not a transition of the structure")
        out.append(e)
    return out


def conjoin_desc(enc: Encoding, uncontrollable: Iterable[Edge]) -> Encoding:
    """Forbid deleting any uncontrollable transition."""
    edges = sorted(set(_check_edges(enc.structure, uncontrollable, "uncontrollable edge")))
    for s, t in edges:
        enc.add("desc", enc.edge(s, t))
    return enc


def conjoin_state_deletion(enc: Encoding) -> Encoding:
    """Add node propositions: a retained state is total, a deleted one isolated."""
    if "nodes" in enc.groups:
        return enc
    m = enc.structure
    states = m.sorted_states()
    enc.groups["total"] = [
        C.implies(enc.var(NodeVar(s)), C.disj(enc.edge(s, t) for t in m.successors(s)))
        for s in states
    ]
    for s in states:
        isolated = C.conj(
            C.conj(C.neg(enc.edge(s, t)) for t in m.successors(s)),
            C.conj(C.neg(enc.edge(t, s)) for t in m.predecessors(s)),
        )
        enc.add("nodes", C.implies(C.neg(enc.var(NodeVar(s))), isolated))
    enc.add("nodes", enc.var(NodeVar(m.initial)))
    return enc


def conjoin_symmetry(enc: Encoding, state_pairs: Iterable[tuple[str, str]] = (),
                     edge_pairs: Iterable[tuple[Edge, Edge]] = ()) -> Encoding:
    m = enc.structure
    state_pairs = [tuple(p) for p in state_pairs]
    edge_pairs = [(tuple(a), tuple(b)) for a, b in edge_pairs]
    for a, b in state_pairs:
        for s in (a, b):
            if s not in m.states:
                raise EncodingError(f"symmetry refers to unknown state {s!r}")
    if state_pairs and "nodes" not in enc.groups:
        raise EncodingError("state symmetry needs the state-deletion constraints")
    for a, b in edge_pairs:
        _check_edges(m, (a, b), "symmetric edge")
    for a, b in state_pairs:
        enc.add("symmetry", C.iff(enc.var(NodeVar(a)), enc.var(NodeVar(b))))
    for (s, t), (u, v) in edge_pairs:
        enc.add("symmetry", C.iff(enc.edge(s, t), enc.edge(u, v)))
    return enc


def conjoin_family_constraints(enc: Encoding, families: Iterable[Iterable[Edge]]) -> Encoding:
    """A family is deleted wholesale, or only at sources made unreachable."""
    encode_reachability(enc)
    seen: set[Edge] = set()
    for fam in families:
        members = sorted(set(_check_edges(enc.structure, fam, "family member")))
        if seen & set(members):
            raise EncodingError("transition families overlap")
        seen.update(members)
        if not members:
            continue
        only_unreachable = C.conj(
            C.implies(C.neg(enc.edge(s, t)), C.neg(enc.var(ReachVar(s)))) for s, t in members
        )
        all_gone = C.conj(C.neg(enc.edge(s, t)) for s, t in members)
        enc.add("family", C.disj(only_unreachable, all_gone))
    return enc


def conjoin_custom(enc: Encoding, constraint: Expr) -> Encoding:
    """Conjoin a user constraint over already-declared propositions."""
    for p in C.variables(constraint):
        if p not in enc.variables:
            raise EncodingError(f"constraint mentions undeclared proposition {p}")
    enc.add("custom", constraint)
    return enc


def parse_constraint(text: str, enc: Encoding) -> Expr:
    """Parse a custom constraint such as ``E(s,t) <-> E(s,u) & ~N(t)``.

    Atoms are ``E(a,b)``, ``N(a)``, ``true`` and ``false``; connectives
    ``~ & | -> <->`` with the usual precedence (``<->`` loosest).
    """
    import re

    tokens = re.findall(r"<->|->|[~&|()]|E\([^)]*\)|N\([^)]*\)|true|false|\S", text)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take():
        nonlocal pos
        if pos >= len(tokens):
            raise EncodingError("constraint ends unexpectedly")
        pos += 1
        return tokens[pos - 1]

    def atom():
        tok = take()
        if tok == "~":
            return C.neg(atom())
        if tok == "(":
            e = equiv()
            if take() != ")":
                raise EncodingError("missing ')' in constraint")
            return e
        if tok in ("true", "false"):
            return C.const(tok == "true")
        if tok.startswith("E("):
            parts = [x.strip() for x in tok[2:-1].split(",")]
            if len(parts) != 2:
                raise EncodingError(f"bad edge atom {tok}")
            return C.var(EdgeVar(*parts))
        if tok.startswith("N("):
            return C.var(NodeVar(tok[2:-1].strip()))
        raise EncodingError(f"unexpected {tok!r} in constraint")

    def conj_():
        e = atom()
        while peek() == "&":
            take()
            e = C.conj(e, atom())
        return e

    def disj_():
        e = conj_()
        while peek() == "|":
            take()
            e = C.disj(e, conj_())
        return e

    def imp():
        e = disj_()
        if peek() == "->":
            take()
            return C.implies(e, imp())
        return e

    def equiv():
        e = imp()
        while peek() == "<->":
            take()
            e = C.iff(e, imp())
        return e

    result = equiv()
    if peek() is not None:
        raise EncodingError(f"unexpected {peek()!r} in constraint")
    return result
