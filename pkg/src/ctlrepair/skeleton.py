"""Synchronization skeletons with atomic read/write actions.

A program is a set of processes, each a graph of local states whose arcs
carry guarded commands, plus finitely-valued shared variables.  This
module builds the global state transition graph, partitions its
transitions into per-arc families, repairs it under family constraints
and emits the repaired program.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

from .checker import check_ctl
from .engine import (
    Failure, InternalVerificationError, RepairOptions, Stats, Unchanged, repair_ctl,
)
from .formula import Formula, desugar, parse_ctl
from .kripke import Edge, GameStructure, KripkeStructure

log = logging.getLogger(__name__)

DEFAULT_STATE_BOUND = 100_000


class SkeletonError(ValueError):
    pass


# --- program model --------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    """Simple term: ``prop`` is in some other process's counter, or ``var = value``."""

    prop: str | None = None
    var: str | None = None
    value: str | None = None

    def __str__(self):
        return self.prop if self.prop is not None else f"{self.var}={self.value}"


@dataclass(frozen=True)
class Action:
    """``kind`` is ``write-L`` (with ``target`` the process), ``assign`` or ``skip``."""

    kind: str
    target: str | None = None
    value: str | None = None

    def __str__(self):
        if self.kind == "write-L":
            return f"L{self.target}"
        if self.kind == "assign":
            return f"{self.target}:={self.value}"
        return "skip"


@dataclass(frozen=True)
class Arc:
    id: str
    src: str
    dst: str
    guard: tuple[Term, ...] = ()  # empty means true
    action: Action = Action("skip")

    def guard_text(self) -> str:
        return "&".join(str(t) for t in self.guard) if self.guard else "true"

    def __str__(self):
        return f"arc {self.id} {self.src} {self.dst} guard {self.guard_text()} do {self.action}"


@dataclass
class Process:
    name: str
    locals: dict[str, frozenset[str]] = field(default_factory=dict)
    init: str | None = None
    arcs: list[Arc] = field(default_factory=list)

    @property
    def ap(self) -> frozenset[str]:
        return frozenset().union(*self.locals.values()) if self.locals else frozenset()


@dataclass
class SharedVar:
    name: str
    domain: tuple[str, ...]
    init: str


@dataclass
class Program:
    processes: list[Process] = field(default_factory=list)
    shared: list[SharedVar] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)  # emitted as comments, ignored on parse

    def process(self, name: str) -> Process:
        for p in self.processes:
            if p.name == name:
                return p
        raise KeyError(name)

    def arcs(self):
        for p in self.processes:
            for a in p.arcs:
                yield p, a

    def without_arcs(self, ids) -> "Program":
        ids = set(ids)
        procs = [Process(p.name, dict(p.locals), p.init, [a for a in p.arcs if a.id not in ids])
                 for p in self.processes]
        return Program(procs, [replace(v) for v in self.shared], list(self.notes))

    def __eq__(self, other):
        # notes are comments and do not affect meaning
        return (isinstance(other, Program) and self.processes == other.processes
                and self.shared == other.shared)


# --- text format ----------------------------------------------------------------


def _parse_guard(text: str, lineno: int) -> tuple[Term, ...]:
    text = text.replace(" ", "")
    if text == "true":
        return ()
    terms = []
    for part in text.split("&"):
        if not part:
            raise SkeletonError(f"line {lineno}: empty guard term")
        if "=" in part:
            var, _, value = part.partition("=")
            if not var or not value:
                raise SkeletonError(f"line {lineno}: bad guard term {part!r}")
            terms.append(Term(var=var, value=value))
        else:
            terms.append(Term(prop=part))
    return tuple(terms)


def _parse_action(text: str, lineno: int) -> Action:
    text = text.replace(" ", "")
    if text == "skip":
        return Action("skip")
    if ":=" in text:
        var, _, value = text.partition(":=")
        if not var or not value:
            raise SkeletonError(f"line {lineno}: bad assignment {text!r}")
        return Action("assign", var, value)
    if text.startswith("L") and len(text) > 1:
        return Action("write-L", text[1:])
    raise SkeletonError(f"line {lineno}: bad action {text!r}")


def parse_program(text: str) -> Program:
    prog = Program()
    current: Process | None = None
    arc_ids: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "process":
            if len(rest) != 1:
                raise SkeletonError(f"line {lineno}: expected 'process <name>'")
            if any(p.name == rest[0] for p in prog.processes):
                raise SkeletonError(f"line {lineno}: duplicate process {rest[0]!r}")
            current = Process(rest[0])
            prog.processes.append(current)
        elif head == "shared":
            # shared <x> domain <v1,..> init <v>
            if len(rest) != 5 or rest[1] != "domain" or rest[3] != "init":
                raise SkeletonError(f"line {lineno}: expected 'shared <x> domain <v1,..> init <v>'")
            domain = tuple(v for v in rest[2].split(",") if v)
            if not domain or len(set(domain)) != len(domain):
                raise SkeletonError(f"line {lineno}: bad domain {rest[2]!r}")
            if rest[4] not in domain:
                raise SkeletonError(f"line {lineno}: initial value {rest[4]!r} not in domain")
            if any(v.name == rest[0] for v in prog.shared):
                raise SkeletonError(f"line {lineno}: duplicate shared variable {rest[0]!r}")
            prog.shared.append(SharedVar(rest[0], domain, rest[4]))
        elif head in ("local", "init", "arc"):
            if current is None:
                raise SkeletonError(f"line {lineno}: {head!r} outside a process")
            if head == "local":
                left, sep, right = line[len("local"):].partition(":")
                name = left.strip()
                if not sep or not name or len(name.split()) != 1:
                    raise SkeletonError(f"line {lineno}: expected 'local <name> : props'")
                if name in current.locals:
                    raise SkeletonError(f"line {lineno}: duplicate local state {name!r}")
                current.locals[name] = frozenset(right.split())
            elif head == "init":
                if len(rest) != 1:
                    raise SkeletonError(f"line {lineno}: expected 'init <name>'")
                if current.init is not None:
                    raise SkeletonError(f"line {lineno}: second init for process {current.name!r}")
                current.init = rest[0]
            else:
                # arc <id> <from> <to> guard <term|true> do <action>
                if len(rest) < 6 or rest[3] != "guard" or "do" not in rest[4:]:
                    raise SkeletonError(f"line {lineno}: expected 'arc <id> <from> <to> guard <g> do <a>'")
                k = rest.index("do", 4)
                aid, src, dst = rest[0], rest[1], rest[2]
                if aid in arc_ids:
                    raise SkeletonError(f"line {lineno}: duplicate arc id {aid!r}")
                arc_ids.add(aid)
                guard = _parse_guard(" ".join(rest[4:k]), lineno)
                action = _parse_action(" ".join(rest[k + 1:]), lineno)
                current.arcs.append(Arc(aid, src, dst, guard, action))
        else:
            raise SkeletonError(f"line {lineno}: unknown directive {head!r}")
    _check_wellformed(prog)
    return prog


def _check_wellformed(prog: Program) -> None:
    if not prog.processes:
        raise SkeletonError("program has no processes")
    owner: dict[str, str] = {}
    for p in prog.processes:
        if not p.locals:
            raise SkeletonError(f"process {p.name!r} has no local states")
        if p.init is None:
            raise SkeletonError(f"process {p.name!r} has no initial local state")
        if p.init not in p.locals:
            raise SkeletonError(f"process {p.name!r}: unknown initial state {p.init!r}")
        for q in p.ap:
            if q in owner and owner[q] != p.name:
                raise SkeletonError(f"proposition {q!r} used by processes {owner[q]!r} and {p.name!r}")
            owner[q] = p.name
        for a in p.arcs:
            for s in (a.src, a.dst):
                if s not in p.locals:
                    raise SkeletonError(f"arc {a.id}: unknown local state {s!r} in process {p.name!r}")


def load_program(path) -> Program:
    return parse_program(Path(path).read_text())


def format_program(prog: Program, removed: list[tuple[str, Arc]] | None = None) -> str:
    """Deterministic text form; ``removed`` (process name, arc) pairs are
    listed as comments under their process."""
    lines = [f"# {n}" for n in prog.notes]
    for v in prog.shared:
        lines.append(f"shared {v.name} domain {','.join(v.domain)} init {v.init}")
    for p in prog.processes:
        lines.append(f"process {p.name}")
        for name, props in p.locals.items():
            lines.append(f"local {name} : {' '.join(sorted(props))}".rstrip())
        lines.append(f"init {p.init}")
        lines.extend(str(a) for a in p.arcs)
        for p2, a in (removed or []):
            if p2 == p.name:
                lines.append(f"# removed: {a}")
    return "\n".join(lines) + "\n"


# --- atomic read/write restriction ---------------------------------------------


def validate_arw(prog: Program) -> list[str]:
    """One message per arc violating the atomic read/write restriction."""
    out = []
    shared = {v.name: v for v in prog.shared}
    owner = {q: p.name for p in prog.processes for q in p.ap}
    for p, a in prog.arcs():
        same_label = p.locals.get(a.src) == p.locals.get(a.dst)
        act = a.action
        where = f"arc {a.id} (process {p.name})"
        if not a.guard:
            if act.kind == "write-L":
                if act.target != p.name:
                    out.append(f"{where}: writes the counter of process {act.target}")
                elif same_label:
                    out.append(f"{where}: writes L{p.name} but the label does not change")
            elif act.kind == "assign":
                v = shared.get(act.target)
                if v is None:
                    out.append(f"{where}: assigns unknown shared variable {act.target!r}")
                elif act.value not in v.domain:
                    out.append(f"{where}: value {act.value!r} not in the domain of {act.target}")
                if not same_label:
                    out.append(f"{where}: writes {act.target} and changes the label")
            else:
                out.append(f"{where}: unguarded but nonwriting")
            continue
        if act.kind != "skip":
            out.append(f"{where}: guarded and writing")
        if not same_label:
            out.append(f"{where}: guarded arc changes the label")
        if len(a.guard) != 1:
            out.append(f"{where}: guard {a.guard_text()} is not a simple term")
            continue
        t = a.guard[0]
        if t.prop is not None:
            j = owner.get(t.prop)
            if j is None:
                out.append(f"{where}: guard reads unknown proposition {t.prop!r}")
            elif j == p.name:
                out.append(f"{where}: guard reads its own process's proposition {t.prop!r}")
        else:
            v = shared.get(t.var)
            if v is None:
                out.append(f"{where}: guard reads unknown shared variable {t.var!r}")
            elif t.value not in v.domain:
                out.append(f"{where}: value {t.value!r} not in the domain of {t.var}")
    return out


# --- global state transition graph ----------------------------------------------


@dataclass
class Stg:
    structure: KripkeStructure
    families: dict[str, frozenset[Edge]]  # arc id -> generated transitions
    arc_of: dict[Edge, str]
    game: GameStructure | None = None
    tuples: dict[str, tuple] = field(default_factory=dict)  # state name -> global tuple


def shared_prop(var: str, value: str) -> str:
    return f"{var}={value}"


def _state_name(prog: Program, g: tuple) -> str:
    k = len(prog.processes)
    parts = list(g[:k]) + [shared_prop(v.name, val) for v, val in zip(prog.shared, g[k:])]
    return ".".join(parts)


def build_global_stg(prog: Program, bound: int = DEFAULT_STATE_BOUND, player: str | None = None) -> Stg:
    """Reachable global states under interleaving of all enabled arcs.

    Labels are the union of the local labels plus one ``x=c`` proposition
    per shared variable.  With ``player`` set, a game structure in which
    that player moves everywhere is built as well.
    """
    problems = validate_arw(prog)
    if problems:
        raise SkeletonError("atomic read/write violations: " + "; ".join(problems))
    k = len(prog.processes)
    var_pos = {v.name: k + j for j, v in enumerate(prog.shared)}
    owner = {q: i for i, p in enumerate(prog.processes) for q in p.ap}
    start = tuple(p.init for p in prog.processes) + tuple(v.init for v in prog.shared)

    def enabled(a: Arc, g: tuple) -> bool:
        for t in a.guard:
            if t.prop is not None:
                i = owner[t.prop]
                if t.prop not in prog.processes[i].locals[g[i]]:
                    return False
            elif g[var_pos[t.var]] != t.value:
                return False
        return True

    seen = {start: _state_name(prog, start)}
    queue = deque([start])
    edges: dict[Edge, str] = {}
    while queue:
        g = queue.popleft()
        for i, p in enumerate(prog.processes):
            for a in p.arcs:
                if a.src != g[i] or not enabled(a, g):
                    continue
                h = list(g)
                h[i] = a.dst
                if a.action.kind == "assign":
                    h[var_pos[a.action.target]] = a.action.value
                h = tuple(h)
                if h not in seen:
                    if len(seen) >= bound:
                        raise SkeletonError(f"global state graph exceeds {bound} states")
                    seen[h] = _state_name(prog, h)
                    queue.append(h)
                e = (seen[g], seen[h])
                if e in edges:
                    raise SkeletonError(f"arcs {edges[e]} and {a.id} generate the same transition {e}")
                edges[e] = a.id
    labels = {}
    for g, name in seen.items():
        lab = set()
        for i, p in enumerate(prog.processes):
            lab |= p.locals[g[i]]
        for v, val in zip(prog.shared, g[k:]):
            lab.add(shared_prop(v.name, val))
        labels[name] = lab
    ap = set().union(*(p.ap for p in prog.processes))
    ap |= {shared_prop(v.name, c) for v in prog.shared for c in v.domain}
    m = KripkeStructure.build(seen[start], seen.values(), edges, labels, ap)
    families: dict[str, set] = {}
    for e, aid in edges.items():
        families.setdefault(aid, set()).add(e)
    game = None
    if player is not None:
        game = GameStructure(m, frozenset([player]), {s: player for s in m.states})
    return Stg(m, {a: frozenset(f) for a, f in families.items()}, edges, game,
               {name: g for g, name in seen.items()})


# --- repair ---------------------------------------------------------------------


@dataclass
class ProgramRepair:
    status: str  # "unchanged" | "repaired" | "failure"
    program: Program | None = None
    stg: Stg | None = None
    structure: KripkeStructure | None = None  # repaired global structure
    removed_arcs: list[tuple[str, Arc]] = field(default_factory=list)
    partial_families: list[str] = field(default_factory=list)
    deleted_edges: frozenset[Edge] = frozenset()
    deleted_states: frozenset[str] = frozenset()
    stats: Stats = field(default_factory=Stats)

    def text(self) -> str:
        if self.program is None:
            return ""
        return format_program(self.program, self.removed_arcs)


def repair_program(prog: Program, eta: Formula | str, opts: RepairOptions | None = None,
                   bound: int = DEFAULT_STATE_BOUND) -> ProgramRepair:
    """Repair ``prog`` against ``eta`` by deleting whole arcs.

    The global graph is repaired with one family constraint per arc.  An
    arc is dropped from its process iff its whole family was deleted;
    families deleted only at unreachable sources keep their arc.  The
    emitted program is rebuilt and re-checked before return.
    """
    if isinstance(eta, str):
        eta = parse_ctl(eta)
    opts = opts or RepairOptions()
    stg = build_global_stg(prog, bound)
    if not opts.constrained() and check_ctl(stg.structure, eta)[0]:
        return ProgramRepair("unchanged", prog, stg, stg.structure)
    arc_ids = sorted(stg.families)
    fam_opts = replace(opts, families=tuple(stg.families[a] for a in arc_ids))
    res = repair_ctl(stg.structure, eta, fam_opts)
    if isinstance(res, Failure):
        return ProgramRepair("failure", stg=stg, stats=res.stats)
    if isinstance(res, Unchanged):  # pragma: no cover - families always constrain
        return ProgramRepair("unchanged", prog, stg, stg.structure)
    deleted = res.deleted_edges
    removed_ids, partial = [], []
    for aid in arc_ids:
        fam = stg.families[aid]
        gone = fam & _deleted_edge_vars(res.assignment)
        if gone == fam:
            removed_ids.append(aid)
        elif gone:
            partial.append(aid)
    removed = [(p.name, a) for p, a in prog.arcs() if a.id in removed_ids]
    new = prog.without_arcs(removed_ids)
    rebuilt = build_global_stg(new, bound)
    ok, _ = check_ctl(rebuilt.structure, desugar(eta))
    if not ok:
        raise InternalVerificationError("rebuilt program does not satisfy the formula")
    return ProgramRepair("repaired", new, rebuilt, res.structure, removed, partial,
                         deleted, res.deleted_states, res.stats)


def _deleted_edge_vars(assignment) -> frozenset[Edge]:
    from .circuit import EdgeVar

    return frozenset((p.s, p.t) for p, v in assignment.items() if isinstance(p, EdgeVar) and not v)
