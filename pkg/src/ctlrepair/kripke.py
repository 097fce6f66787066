"""Finite Kripke structures and turn-based synchronous game structures.

States and propositions are plain strings.  Every collection that can
influence output order is iterated in lexicographic order, so encodings
and emitted files are reproducible.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

Edge = tuple[str, str]


class StructureError(ValueError):
    """Raised for malformed structure files or invalid structures."""


@dataclass(frozen=True)
class KripkeStructure:
    initial: str
    states: frozenset[str]
    transitions: frozenset[Edge]
    labels: Mapping[str, frozenset[str]]
    ap: frozenset[str]

    @classmethod
    def build(
        cls,
        initial: str,
        states: Iterable[str],
        transitions: Iterable[Edge],
        labels: Mapping[str, Iterable[str]],
        ap: Iterable[str] | None = None,
    ) -> "KripkeStructure":
        """Convenience constructor; ``ap`` defaults to the union of all labels."""
        lab = {s: frozenset(v) for s, v in labels.items()}
        if ap is None:
            ap = frozenset().union(*lab.values()) if lab else frozenset()
        return cls(
            initial=initial,
            states=frozenset(states),
            transitions=frozenset((a, b) for a, b in transitions),
            labels=_FrozenDict(lab),
            ap=frozenset(ap),
        )

    def successors(self, s: str) -> list[str]:
        return self._succ.get(s, [])

    def predecessors(self, s: str) -> list[str]:
        return self._pred.get(s, [])

    def sorted_states(self) -> list[str]:
        return self._sorted

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.transitions)

    def label(self, s: str) -> frozenset[str]:
        return self.labels.get(s, frozenset())

    def __post_init__(self):
        if not isinstance(self.labels, _FrozenDict):
            object.__setattr__(self, "labels", _FrozenDict({s: frozenset(v) for s, v in self.labels.items()}))
        succ: dict[str, list[str]] = {}
        pred: dict[str, list[str]] = {}
        for a, b in sorted(self.transitions):
            succ.setdefault(a, []).append(b)
            pred.setdefault(b, []).append(a)
        object.__setattr__(self, "_succ", succ)
        object.__setattr__(self, "_pred", pred)
        object.__setattr__(self, "_sorted", sorted(self.states))

    def restrict(self, edges: Iterable[Edge]) -> "KripkeStructure":
        """The substructure keeping ``edges`` and the states they reach from the initial state."""
        edges = frozenset(edges)
        keep = reachable(self, edges)
        return KripkeStructure(
            initial=self.initial,
            states=frozenset(keep),
            transitions=frozenset((a, b) for a, b in edges if a in keep),
            labels=_FrozenDict({s: self.labels[s] for s in keep}),
            ap=self.ap,
        )


class _FrozenDict(dict):
    """Hashable read-only dict so structures can be compared and hashed."""

    def __hash__(self):
        return hash(frozenset(self.items()))

    def _readonly(self, *args, **kwargs):
        raise TypeError("labels are immutable")

    __setitem__ = __delitem__ = clear = pop = popitem = setdefault = update = _readonly


@dataclass(frozen=True)
class GameStructure:
    base: KripkeStructure
    players: frozenset[str]
    turn: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.turn, _FrozenDict):
            object.__setattr__(self, "turn", _FrozenDict(self.turn))
        object.__setattr__(self, "players", frozenset(self.players))


def validate(m: KripkeStructure) -> list[str]:
    """Return a description of every violated structural invariant."""
    problems = []
    if not m.initial:
        problems.append("initial state name is empty")
    for s in sorted(m.states):
        if not s:
            problems.append("empty state name")
    if m.initial not in m.states:
        problems.append(f"initial state {m.initial!r} is not a state")
    for a, b in sorted(m.transitions):
        if a not in m.states or b not in m.states:
            problems.append(f"transition ({a},{b}) has an endpoint outside the state set")
    for s in sorted(m.states - set(m.labels)):
        problems.append(f"state {s!r} has no label entry")
    for s in sorted(set(m.labels) - m.states):
        problems.append(f"label entry for unknown state {s!r}")
    for s in sorted(m.labels):
        extra = m.labels[s] - m.ap
        if extra:
            problems.append(f"label of {s!r} uses propositions outside AP: {sorted(extra)}")
    return problems


def validate_game(g: GameStructure) -> list[str]:
    problems = validate(g.base)
    for s in sorted(g.base.states - set(g.turn)):
        problems.append(f"state {s!r} has no turn entry")
    for s in sorted(set(g.turn) - g.base.states):
        problems.append(f"turn entry for unknown state {s!r}")
    for s in sorted(g.turn):
        if g.turn[s] not in g.players:
            problems.append(f"turn of {s!r} is {g.turn[s]!r}, not a declared player")
    return problems


def is_total(m: KripkeStructure) -> bool:
    return all(m.successors(s) for s in m.states)


def is_substructure(sub: KripkeStructure, sup: KripkeStructure) -> bool:
    """True iff ``sub`` arises from ``sup`` by deleting transitions and states."""
    if sub.initial != sup.initial or not sub.states <= sup.states:
        return False
    for a, b in sub.transitions:
        if (a, b) not in sup.transitions or a not in sub.states or b not in sub.states:
            return False
    if set(sub.labels) != set(sub.states):
        return False
    return all(sub.labels[s] == sup.labels.get(s) for s in sub.states)


def reachable(m: KripkeStructure, edges: Iterable[Edge] | None = None) -> set[str]:
    """States reachable from the initial state using only ``edges`` (default: all)."""
    if edges is None:
        succ = {s: m.successors(s) for s in m.states}
    else:
        succ = {}
        for a, b in edges:
            succ.setdefault(a, []).append(b)
    seen = {m.initial}
    queue = deque([m.initial])
    while queue:
        s = queue.popleft()
        for t in succ.get(s, ()):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


# --- text format ---------------------------------------------------------------


def format_structure(m: KripkeStructure | GameStructure) -> str:
    game = m if isinstance(m, GameStructure) else None
    k = game.base if game else m
    lines = ["ap " + " ".join(sorted(k.ap)) if k.ap else "ap"]
    if game is not None:
        lines.append("players " + " ".join(sorted(game.players)))
    for s in k.sorted_states():
        init = " init" if s == k.initial else ""
        props = " ".join(sorted(k.labels.get(s, ())))
        lines.append(f"state {s}{init} :" + (f" {props}" if props else ""))
    for a, b in k.sorted_edges():
        lines.append(f"edge {a} {b}")
    if game is not None:
        for s in k.sorted_states():
            if s in game.turn:
                lines.append(f"turn {s} {game.turn[s]}")
    return "\n".join(lines) + "\n"


def parse_structure(text: str) -> KripkeStructure | GameStructure:
    """Parse the line-oriented structure format.

    Returns a :class:`GameStructure` when the text contains ``turn`` or
    ``players`` lines, otherwise a :class:`KripkeStructure`.
    """
    initial = None
    states: list[str] = []
    labels: dict[str, frozenset[str]] = {}
    edges: list[Edge] = []
    turns: dict[str, str] = {}
    ap: set[str] | None = None
    players: set[str] | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "ap":
            ap = set(rest)
        elif head == "players":
            players = set(rest)
        elif head == "state":
            left, sep, right = line[len("state"):].partition(":")
            if not sep:
                raise StructureError(f"line {lineno}: state line needs ':'")
            words = left.split()
            if not words or len(words) > 2 or (len(words) == 2 and words[1] != "init"):
                raise StructureError(f"line {lineno}: expected 'state <name> [init] : props'")
            name = words[0]
            if name in labels:
                raise StructureError(f"line {lineno}: duplicate state {name!r}")
            if len(words) == 2:
                if initial is not None:
                    raise StructureError(f"line {lineno}: second initial state {name!r}")
                initial = name
            states.append(name)
            labels[name] = frozenset(right.split())
        elif head == "edge":
            if len(rest) != 2:
                raise StructureError(f"line {lineno}: expected 'edge <from> <to>'")
            edges.append((rest[0], rest[1]))
        elif head == "turn":
            if len(rest) != 2:
                raise StructureError(f"line {lineno}: expected 'turn <state> <player>'")
            turns[rest[0]] = rest[1]
        else:
            raise StructureError(f"line {lineno}: unknown directive {head!r}")
    if initial is None:
        raise StructureError("no initial state declared")
    m = KripkeStructure.build(initial, states, edges, labels, ap)
    problems = validate(m)
    if problems:
        raise StructureError("; ".join(problems))
    if turns or players is not None:
        if players is None:
            players = set(turns.values())
        g = GameStructure(m, frozenset(players), turns)
        problems = validate_game(g)
        if problems:
            raise StructureError("; ".join(problems))
        return g
    return m


def load_structure(path) -> KripkeStructure | GameStructure:
    with open(path, encoding="utf-8") as fh:
        return parse_structure(fh.read())
