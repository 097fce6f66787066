"""End-to-end repair: model check, encode, solve, decode, re-verify.

Also hosts the generators used for testing and benchmarking: an
exhaustive brute-force repair oracle, the 3SAT reduction and random
Kripke structures.
"""

from __future__ import annotations

import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .checker import check_atl, check_ctl
from .circuit import EdgeVar, Expr, PropVar
from .cnf import CnfFormula, VarMap, tseitin
from .encoder import (
    Encoding, conjoin_custom, conjoin_desc, conjoin_family_constraints, conjoin_state_deletion,
    conjoin_symmetry, encode_atl_repair, encode_ctl_repair, parse_constraint,
)
from .formula import (
    AG, AX, EX, And, Formula, Implies, Not, Or, Prop, atl_desugar, desugar, is_atl, is_ctl,
    parse_atl, parse_ctl,
)
from .kripke import (
    Edge, GameStructure, KripkeStructure, is_substructure, is_total, reachable, validate,
    validate_game,
)
from .solver import run_solver

log = logging.getLogger(__name__)


class RepairError(ValueError):
    """Bad input to a repair call."""


class InternalVerificationError(RuntimeError):
    """A decoded repair failed re-verification; always a bug."""


@dataclass
class RepairOptions:
    uncontrollable: frozenset[Edge] = frozenset()
    state_pairs: tuple[tuple[str, str], ...] = ()
    edge_pairs: tuple[tuple[Edge, Edge], ...] = ()
    constraint: Expr | str | None = None
    state_deletion: bool = False
    families: tuple[frozenset[Edge], ...] = ()
    solver: str | None = None
    seed: int = 0
    max_conflicts: int | None = None

    def constrained(self) -> bool:
        """True when any option adds constraints beyond the plain repair formula."""
        return bool(self.uncontrollable or self.state_pairs or self.edge_pairs
                    or self.constraint is not None or self.state_deletion or self.families)


@dataclass
class Stats:
    propositions: int = 0
    clauses: int = 0
    original: int = 0


@dataclass
class Unchanged:
    structure: KripkeStructure | GameStructure
    status = "unchanged"


@dataclass
class Repaired:
    structure: KripkeStructure | GameStructure
    deleted_edges: frozenset[Edge]
    deleted_states: frozenset[str]
    assignment: dict[PropVar, bool]
    stats: Stats = field(default_factory=Stats)
    status = "repaired"

    @property
    def retained_edges(self) -> frozenset[Edge]:
        return frozenset((p.s, p.t) for p, v in self.assignment.items() if isinstance(p, EdgeVar) and v)


@dataclass
class Failure:
    stats: Stats = field(default_factory=Stats)
    status = "failure"


RepairResult = Unchanged | Repaired | Failure


@dataclass
class Instance:
    """A compiled repair instance, ready for any SAT solver."""

    encoding: Encoding
    cnf: CnfFormula
    varmap: VarMap

    @property
    def stats(self) -> Stats:
        return Stats(self.cnf.num_vars, self.cnf.num_clauses, self.varmap.num_original)

    def edge_indices(self) -> dict[Edge, int]:
        return {(p.s, p.t): i for p, i in self.varmap.index.items() if isinstance(p, EdgeVar)}


def _base(m):
    return m.base if isinstance(m, GameStructure) else m


def _as_formula(eta, game: bool) -> Formula:
    if isinstance(eta, str):
        return parse_atl(eta) if game else parse_ctl(eta)
    return eta


def apply_options(enc: Encoding, opts: RepairOptions) -> Encoding:
    if opts.state_deletion or opts.state_pairs:
        conjoin_state_deletion(enc)
    if opts.uncontrollable:
        conjoin_desc(enc, opts.uncontrollable)
    if opts.state_pairs or opts.edge_pairs:
        conjoin_symmetry(enc, opts.state_pairs, opts.edge_pairs)
    if opts.families:
        conjoin_family_constraints(enc, opts.families)
    if opts.constraint is not None:
        c = opts.constraint
        if isinstance(c, str):
            c = parse_constraint(c, enc)
        conjoin_custom(enc, c)
    return enc


def compile_instance(m, eta, opts: RepairOptions | None = None) -> Instance:
    """Encode ``(m, eta)`` plus option constraints and convert to CNF."""
    opts = opts or RepairOptions()
    if isinstance(m, GameStructure):
        core = atl_desugar(_as_formula(eta, True), m.players)
        enc = encode_atl_repair(m, core)
    else:
        core = desugar(_as_formula(eta, False))
        enc = encode_ctl_repair(m, core)
    apply_options(enc, opts)
    cnf, vm = tseitin(enc)
    return Instance(enc, cnf, vm)


def decode(m, edges: Iterable[Edge]):
    """The substructure induced by the retained ``edges`` (unreachable states dropped)."""
    if isinstance(m, GameStructure):
        k = m.base.restrict(edges)
        return GameStructure(k, m.players, {s: m.turn[s] for s in k.states})
    return m.restrict(edges)


def _holds(m, eta: Formula) -> bool:
    if isinstance(m, GameStructure):
        return check_atl(m, eta)[0]
    return check_ctl(m, eta)[0]


def _check_input(m) -> None:
    problems = validate_game(m) if isinstance(m, GameStructure) else validate(m)
    if problems:
        raise RepairError("invalid structure: " + "; ".join(problems))
    if not is_total(_base(m)):
        raise RepairError("structure is not total")


def _verify(m, repaired, eta: Formula, opts: RepairOptions, retained: frozenset[Edge]) -> None:
    base, rb = _base(m), _base(repaired)
    if not is_total(rb):
        raise InternalVerificationError("repaired structure is not total")
    if not is_substructure(rb, base):
        raise InternalVerificationError("repaired structure is not a substructure of the input")
    if not _holds(repaired, eta):
        raise InternalVerificationError("repaired structure does not satisfy the formula")
    for s, t in opts.uncontrollable:
        if (s, t) not in retained:
            raise InternalVerificationError(f"uncontrollable edge {(s, t)} was deleted")
    if opts.families:
        live = reachable(base, retained)
        for fam in opts.families:
            gone = [e for e in fam if e not in retained]
            if gone and len(gone) != len(fam) and any(s in live for s, _ in gone):
                raise InternalVerificationError("a family was partially deleted at a reachable state")


def solve_instance(m, eta: Formula, inst: Instance, opts: RepairOptions | None = None) -> RepairResult:
    """Solve a compiled instance, decode the model and re-verify it."""
    opts = opts or RepairOptions()
    # branching on edge variables first: everything else follows by propagation
    res = run_solver(inst.cnf, opts.solver, seed=opts.seed, max_conflicts=opts.max_conflicts,
                     priority=sorted(inst.edge_indices().values()))
    if not res.sat:
        return Failure(inst.stats)
    values = inst.varmap.decode(res.assignment)
    retained = frozenset((p.s, p.t) for p, v in values.items() if isinstance(p, EdgeVar) and v)
    repaired = decode(m, retained)
    _verify(m, repaired, eta, opts, retained)
    base, rb = _base(m), _base(repaired)
    return Repaired(
        structure=repaired,
        deleted_edges=frozenset(base.transitions - rb.transitions),
        deleted_states=frozenset(base.states - rb.states),
        assignment=values,
        stats=inst.stats,
    )


def _repair(m, eta: Formula, opts: RepairOptions | None) -> RepairResult:
    opts = opts or RepairOptions()
    _check_input(m)
    if not opts.constrained() and _holds(m, eta):
        return Unchanged(m)
    inst = compile_instance(m, eta, opts)
    log.debug("repair formula: %d variables, %d clauses", inst.cnf.num_vars, inst.cnf.num_clauses)
    return solve_instance(m, eta, inst, opts)


def repair_ctl(m: KripkeStructure, eta: Formula | str, opts: RepairOptions | None = None) -> RepairResult:
    """Repair ``m`` so that it satisfies the CTL formula ``eta``.

    Returns :class:`Unchanged` when ``m`` already satisfies ``eta`` and no
    constraints were requested, :class:`Failure` when no repair exists,
    and :class:`Repaired` otherwise.  Any repaired structure has been
    re-checked (total, substructure, satisfies ``eta``) before return.
    """
    if isinstance(m, GameStructure):
        raise RepairError("repair_ctl needs a Kripke structure; use repair_atl for games")
    eta = _as_formula(eta, False)
    if not is_ctl(eta):
        raise RepairError(f"not a CTL formula: {eta}")
    return _repair(m, eta, opts)


def repair_atl(g: GameStructure, eta: Formula | str, opts: RepairOptions | None = None) -> RepairResult:
    if not isinstance(g, GameStructure):
        raise RepairError("repair_atl needs a game structure")
    eta = _as_formula(eta, True)
    if not is_atl(eta):
        raise RepairError(f"not an ATL formula: {eta}")
    return _repair(g, eta, opts)


def additive_repair(m: KripkeStructure, added_states: Iterable[str], added_labels: Mapping[str, Iterable[str]],
                    added_edges: Iterable[Edge], eta: Formula | str,
                    opts: RepairOptions | None = None) -> RepairResult:
    """Extend ``m`` with new states and transitions, then repair subtractively."""
    added_states = set(added_states)
    added_edges = {tuple(e) for e in added_edges}
    if added_states & m.states:
        raise RepairError(f"added states already exist: {sorted(added_states & m.states)}")
    missing = added_states - set(added_labels)
    if missing:
        raise RepairError(f"no labels given for added states {sorted(missing)}")
    extra = set(added_labels) - added_states
    if extra:
        raise RepairError(f"labels given for states that are not being added: {sorted(extra)}")
    everything = m.states | added_states
    for s, t in added_edges:
        if s not in everything or t not in everything:
            raise RepairError(f"added edge {(s, t)} has an unknown endpoint")
        if (s, t) in m.transitions:
            raise RepairError(f"added edge {(s, t)} is already a transition")
    labels = dict(m.labels)
    labels.update({s: frozenset(v) for s, v in added_labels.items()})
    ap = m.ap.union(*labels.values())
    plus = KripkeStructure.build(m.initial, everything, m.transitions | added_edges, labels, ap)
    if not is_total(plus):
        raise RepairError("the extended structure is not total")
    return repair_ctl(plus, eta, opts)


# --- brute-force oracle ---------------------------------------------------------

BRUTE_FORCE_MAX_EDGES = 20


def all_repairs(m, eta: Formula | str, required: Iterable[Edge] = ()) -> Iterator:
    """Every distinct total substructure of ``m`` satisfying ``eta``.

    Enumerates one non-empty set of outgoing edges per state (``m`` is
    total, so every total substructure arises this way) and keeps the
    reachable part.  ``required`` edges must be kept.
    """
    base = _base(m)
    if len(base.transitions) > BRUTE_FORCE_MAX_EDGES:
        raise RepairError(f"brute force is limited to {BRUTE_FORCE_MAX_EDGES} transitions")
    _check_input(m)
    eta = _as_formula(eta, isinstance(m, GameStructure))
    required = {tuple(e) for e in required}
    choices = []
    for s in base.sorted_states():
        out = [(s, t) for t in base.successors(s)]
        need = [e for e in out if e in required]
        free = [e for e in out if e not in required]
        opts = []
        # largest choices first, so an unmodified M is the first witness
        for k in range(len(free), -1, -1):
            for combo in itertools.combinations(free, k):
                if need or combo:
                    opts.append(tuple(need) + combo)
        choices.append(opts)
    seen = set()
    for pick in itertools.product(*choices):
        edges = frozenset(e for part in pick for e in part)
        sub_m = decode(m, edges)
        key = _base(sub_m).transitions
        if key in seen:
            continue
        seen.add(key)
        if _holds(sub_m, eta):
            yield sub_m


def brute_force_repair(m, eta: Formula | str, required: Iterable[Edge] = ()) -> RepairResult:
    """Exact oracle: a total substructure satisfying ``eta`` (``m`` itself when it
    qualifies), else Failure."""
    for sub_m in all_repairs(m, eta, required):
        base, sb = _base(m), _base(sub_m)
        return Repaired(sub_m, frozenset(base.transitions - sb.transitions),
                        frozenset(base.states - sb.states), {})
    return Failure()


# --- generators -----------------------------------------------------------------


def reduce_3sat(clauses: Sequence[Sequence[int]], num_vars: int | None = None) -> tuple[KripkeStructure, Formula]:
    """Kripke structure and CTL formula that are repairable iff ``clauses`` is satisfiable.

    Literals are DIMACS-style non-zero integers over variables ``1..m``.
    A positive literal ``xj`` becomes ``AG(pj -> EX qj)`` (keep ``sj -> tj``),
    a negative one ``AG(pj -> AX ~qj)`` (drop it).  ``EX pj`` conjuncts keep
    every gadget reachable so the clause constraints cannot be dodged.
    """
    clauses = [tuple(c) for c in clauses]
    m = num_vars if num_vars is not None else max((abs(l) for c in clauses for l in c), default=0)
    if m < 1:
        raise RepairError("need at least one variable")
    for c in clauses:
        if not 1 <= len(c) <= 3 or any(l == 0 or abs(l) > m for l in c):
            raise RepairError(f"malformed clause {c}")
    states = ["s0"] + [f"s{j}" for j in range(1, m + 1)] + [f"t{j}" for j in range(1, m + 1)]
    edges = [("s0", "s0")]
    labels = {"s0": set()}
    for j in range(1, m + 1):
        edges += [("s0", f"s{j}"), (f"s{j}", f"t{j}"), (f"s{j}", f"s{j}"), (f"t{j}", f"t{j}")]
        labels[f"s{j}"] = {f"p{j}"}
        labels[f"t{j}"] = {f"q{j}"}
    ap = [f"p{j}" for j in range(1, m + 1)] + [f"q{j}" for j in range(1, m + 1)]
    k = KripkeStructure.build("s0", states, edges, labels, ap)

    def gadget(l: int) -> Formula:
        j = abs(l)
        p, q = Prop(f"p{j}"), Prop(f"q{j}")
        return AG(Implies(p, EX(q) if l > 0 else AX(Not(q))))

    parts = []
    for c in clauses:
        f = gadget(c[0])
        for l in c[1:]:
            f = Or(f, gadget(l))
        parts.append(f)
    parts += [EX(Prop(f"p{j}")) for j in range(1, m + 1)]
    eta = parts[0]
    for f in parts[1:]:
        eta = And(eta, f)
    return k, eta


def random_model(n: int, p: float, ap: Iterable[str] = ("p", "q"), seed: int = 0) -> KripkeStructure:
    """Random structure: each ordered pair (self-loops included) is an edge
    with probability ``p``, each proposition holds with probability 1/2;
    a state left without successors gets one uniformly random edge."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    rng = random.Random(seed)
    width = len(str(n - 1))
    names = [f"s{i:0{width}d}" for i in range(n)]
    ap = sorted(ap)
    edges = []
    for a in names:
        for b in names:
            if rng.random() < p:
                edges.append((a, b))
    labels = {s: {q for q in ap if rng.random() < 0.5} for s in names}
    has_out = {a for a, _ in edges}
    for a in names:
        if a not in has_out:
            edges.append((a, rng.choice(names)))
    return KripkeStructure.build(names[0], names, edges, labels, ap)


def random_game(n: int, p: float, players: Sequence[str] = ("1", "2"), ap: Iterable[str] = ("p", "q"),
                seed: int = 0) -> GameStructure:
    m = random_model(n, p, ap, seed)
    rng = random.Random(seed ^ 0x5EED)
    turn = {s: rng.choice(list(players)) for s in m.sorted_states()}
    return GameStructure(m, frozenset(players), turn)
