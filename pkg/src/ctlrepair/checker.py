"""Explicit-state CTL and ATL model checking by closure labelling.

Every member of the sub-formula closure is labelled at every state,
unreachable ones included.  Release operators are greatest fixpoints,
computed by straightforward iteration (at most ``|S|`` rounds each).
"""

from __future__ import annotations

from dataclasses import dataclass

from .formula import (
    AV, AX, EV, EX, And, CoalV, CoalX, Const, Formula, FormulaError, Not, Or, Prop,
    atl_desugar, desugar, is_core, is_ctl, props, sub,
)
from .kripke import GameStructure, KripkeStructure, is_total, validate, validate_game


class CheckError(ValueError):
    pass


@dataclass(frozen=True)
class LabelMap:
    """Satisfaction sets: ``sat[f]`` is the set of states where ``f`` holds."""

    states: tuple[str, ...]
    sat: dict[Formula, frozenset[str]]

    def __getitem__(self, key: tuple[str, Formula]) -> bool:
        s, f = key
        return s in self.sat[f]

    def holds(self, s: str, f: Formula) -> bool:
        return s in self.sat[f]

    @property
    def formulas(self) -> tuple[Formula, ...]:
        return tuple(self.sat)

    def to_table(self) -> str:
        """One line per (formula, state) pair: ``<state>\\t<0|1>\\t<formula>``."""
        lines = []
        for f, states in self.sat.items():
            for s in self.states:
                lines.append(f"{s}\t{int(s in states)}\t{f.text}")
        return "\n".join(lines) + "\n"


def _prepare(m: KripkeStructure, eta: Formula) -> None:
    problems = validate(m)
    if problems:
        raise CheckError("invalid structure: " + "; ".join(problems))
    if not is_total(m):
        raise CheckError("structure is not total")
    unknown = props(eta) - m.ap
    if unknown:
        raise CheckError(f"unknown propositions: {sorted(unknown)}")


def _label(m: KripkeStructure, eta: Formula, owner=None) -> LabelMap:
    """Label the closure of a core formula.

    ``owner`` maps a coalition to the set of states it controls; only
    needed for ATL.
    """
    states = m.sorted_states()
    everything = frozenset(states)
    succ = {s: m.successors(s) for s in states}
    sat: dict[Formula, frozenset[str]] = {}

    def pre_all(target):
        return {s for s in states if all(t in target for t in succ[s])}

    def pre_some(target):
        return {s for s in states if any(t in target for t in succ[s])}

    def cpre(agents, target):
        mine = owner(agents)
        return {
            s for s in states
            if (any(t in target for t in succ[s]) if s in mine else all(t in target for t in succ[s]))
        }

    for f in sub(eta):
        t = type(f)
        if t is Const:
            val = everything if f.value else frozenset()
        elif t is Prop:
            val = frozenset(s for s in states if f.name in m.labels[s])
        elif t is Not:
            val = everything - sat[f.arg]
        elif t is And:
            val = sat[f.left] & sat[f.right]
        elif t is Or:
            val = sat[f.left] | sat[f.right]
        elif t is AX:
            val = frozenset(pre_all(sat[f.arg]))
        elif t is EX:
            val = frozenset(pre_some(sat[f.arg]))
        elif t is CoalX:
            val = frozenset(cpre(f.agents, sat[f.arg]))
        elif t in (AV, EV, CoalV):
            phi, psi = sat[f.left], sat[f.right]
            if t is AV:
                step = pre_all
            elif t is EV:
                step = pre_some
            else:
                step = lambda z, a=f.agents: cpre(a, z)  # noqa: E731
            z = set(psi)
            while True:
                nz = psi & (phi | step(z))
                if nz == z:
                    break
                z = set(nz)
            val = frozenset(z)
        else:
            raise FormulaError(f"not a core formula: {f.text}")
        sat[f] = val
    return LabelMap(tuple(states), sat)


def check_ctl(m: KripkeStructure, eta: Formula) -> tuple[bool, LabelMap]:
    """Model check ``eta`` (sugar allowed) on a total structure."""
    if not is_ctl(eta):
        raise CheckError(f"not a CTL formula: {eta.text}")
    core = eta if is_core(eta) else desugar(eta)
    _prepare(m, core)
    labels = _label(m, core)
    return labels.holds(m.initial, core), labels


def check_atl(g: GameStructure, eta: Formula) -> tuple[bool, LabelMap]:
    """Model check an ATL formula on a turn-based synchronous game."""
    problems = validate_game(g)
    if problems:
        raise CheckError("invalid game structure: " + "; ".join(problems))
    try:
        core = atl_desugar(eta, g.players)
    except FormulaError as exc:
        raise CheckError(str(exc)) from None
    _prepare(g.base, core)
    cache: dict[frozenset, frozenset] = {}

    def owner(agents):
        if agents not in cache:
            cache[agents] = frozenset(s for s, p in g.turn.items() if p in agents)
        return cache[agents]

    labels = _label(g.base, core, owner)
    return labels.holds(g.base.initial, core), labels


def holds(m: KripkeStructure | GameStructure, eta: Formula) -> bool:
    if isinstance(m, GameStructure):
        return check_atl(m, eta)[0]
    return check_ctl(m, eta)[0]
