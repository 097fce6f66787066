"""Command-line interface.

Exit codes: 0 success, 1 formula false (``check``), 2 usage or parse
error, 3 no repair exists, 4 solver resource limit.
"""

from __future__ import annotations

import argparse
import logging
import os
import random
import sys
import time
from pathlib import Path

from .checker import CheckError, check_atl, check_ctl
from .cnf import DimacsError, format_result, parse_dimacs, to_dimacs
from .encoder import EncodingError
from .engine import (
    Failure, InternalVerificationError, RepairError, RepairOptions, Unchanged, compile_instance,
    random_game, random_model, reduce_3sat, repair_atl, repair_ctl, solve_instance,
)
from .formula import FormulaError, parse_atl, parse_ctl
from .kripke import GameStructure, StructureError, format_structure, parse_structure
from .skeleton import SkeletonError, format_program, parse_program, repair_program
from .solver import SOLVER_ENV, ResourceLimitExceeded, SolverError, run_solver

EXIT_OK, EXIT_FALSE, EXIT_USAGE, EXIT_NO_REPAIR, EXIT_LIMIT = 0, 1, 2, 3, 4

# formulas used for the random-structure benchmark when none is given
BENCH_SMALL_FORMULA = "AX A[p V q] & EX q"
BENCH_FORMULA = "A[p V q]"

log = logging.getLogger("ctlrepair")


class UsageError(Exception):
    pass


# --- input helpers --------------------------------------------------------------


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _formula_text(args) -> str:
    given = [x for x in (args.formula, args.formula_file) if x is not None]
    if len(given) != 1:
        raise UsageError("give exactly one of FORMULA or --formula-file")
    if args.formula is not None:
        return args.formula
    lines = [l.split("#", 1)[0].strip() for l in _read(args.formula_file).splitlines()]
    return " ".join(l for l in lines if l)


def parse_edge_list(text: str) -> frozenset:
    """Lines ``<s> <t>`` (an optional leading ``edge`` is accepted)."""
    out = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        words = raw.split("#", 1)[0].split()
        if words and words[0] == "edge":
            words = words[1:]
        if not words:
            continue
        if len(words) != 2:
            raise UsageError(f"edge list line {lineno}: expected '<s> <t>'")
        out.add((words[0], words[1]))
    return frozenset(out)


def parse_symmetry(text: str):
    """Lines ``state <a> <b>`` and ``edge <a> <b> <c> <d>`` (edge (a,b) paired with (c,d))."""
    states, edges = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        if words[0] == "state" and len(words) == 3:
            states.append((words[1], words[2]))
        elif words[0] == "edge" and len(words) == 5:
            edges.append(((words[1], words[2]), (words[3], words[4])))
        else:
            raise UsageError(f"symmetry line {lineno}: expected 'state a b' or 'edge a b c d'")
    return tuple(states), tuple(edges)


def parse_families(text: str):
    """Lines ``<family-id> <s> <t>``; edges sharing an id form one family."""
    fams: dict[str, set] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        words = raw.split("#", 1)[0].split()
        if not words:
            continue
        if len(words) != 3:
            raise UsageError(f"families line {lineno}: expected '<family> <s> <t>'")
        fams.setdefault(words[0], set()).add((words[1], words[2]))
    return tuple(frozenset(fams[k]) for k in sorted(fams))


def _options(args) -> RepairOptions:
    opts = RepairOptions(seed=args.seed, max_conflicts=args.max_conflicts,
                         solver=args.solver or os.environ.get(SOLVER_ENV) or None,
                         state_deletion=args.allow_state_deletion)
    if args.uncontrollable:
        opts.uncontrollable = parse_edge_list(_read(args.uncontrollable))
    if args.symmetry:
        opts.state_pairs, opts.edge_pairs = parse_symmetry(_read(args.symmetry))
    if args.families:
        opts.families = parse_families(_read(args.families))
    if args.constraint:
        opts.constraint = " & ".join(f"({c})" for c in args.constraint)
    return opts


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_dimacs(m, eta, opts: RepairOptions, path: str | None) -> None:
    if path:
        inst = compile_instance(m, eta, opts)
        Path(path).write_text(to_dimacs(inst.cnf, inst.varmap))


# --- commands -------------------------------------------------------------------


def cmd_check(args) -> int:
    m = parse_structure(_read(args.structure))
    text = _formula_text(args)
    if isinstance(m, GameStructure):
        ok, labels = check_atl(m, parse_atl(text))
    else:
        ok, labels = check_ctl(m, parse_ctl(text))
    print("true" if ok else "false")
    if args.labels:
        sys.stdout.write(labels.to_table())
    return EXIT_OK if ok else EXIT_FALSE


def _report_repair(res, original_text: str, out: str | None, fmt) -> int:
    if isinstance(res, Failure):
        print("# status: failure (no repair exists)")
        print(f"# cnf: {res.stats.propositions} propositions, {res.stats.clauses} clauses")
        return EXIT_NO_REPAIR
    if isinstance(res, Unchanged):
        print("# status: unchanged")
        _emit(original_text, out)
        return EXIT_OK
    print("# status: repaired")
    print(f"# cnf: {res.stats.propositions} propositions, {res.stats.clauses} clauses")
    for s, t in sorted(res.deleted_edges):
        print(f"# deleted edge {s} {t}")
    for s in sorted(res.deleted_states):
        print(f"# deleted state {s}")
    _emit(fmt(res.structure), out)
    return EXIT_OK


def cmd_repair(args) -> int:
    text = _read(args.structure)
    m = parse_structure(text)
    if isinstance(m, GameStructure):
        raise UsageError("structure has turns; use repair-atl")
    eta = parse_ctl(_formula_text(args))
    opts = _options(args)
    _emit_dimacs(m, eta, opts, args.emit_dimacs)
    return _report_repair(repair_ctl(m, eta, opts), text, args.out, format_structure)


def cmd_repair_atl(args) -> int:
    text = _read(args.structure)
    g = parse_structure(text)
    if not isinstance(g, GameStructure):
        raise UsageError("structure has no players or turns; use repair")
    eta = parse_atl(_formula_text(args))
    opts = _options(args)
    _emit_dimacs(g, eta, opts, args.emit_dimacs)
    return _report_repair(repair_atl(g, eta, opts), text, args.out, format_structure)


def cmd_skeleton_repair(args) -> int:
    text = _read(args.program)
    prog = parse_program(text)
    eta = parse_ctl(_formula_text(args))
    opts = _options(args)
    if opts.families:
        raise UsageError("families are derived from the program; --families is not accepted here")
    res = repair_program(prog, eta, opts)
    if res.status == "failure":
        print("# status: failure (no repair exists)")
        print(f"# cnf: {res.stats.propositions} propositions, {res.stats.clauses} clauses")
        return EXIT_NO_REPAIR
    if res.status == "unchanged":
        print("# status: unchanged")
        _emit(text, args.out)
        return EXIT_OK
    print("# status: repaired")
    print(f"# cnf: {res.stats.propositions} propositions, {res.stats.clauses} clauses")
    for _, arc in res.removed_arcs:
        print(f"# removed arc {arc.id}")
    for aid in res.partial_families:
        print(f"# kept arc {aid}: its transitions are deleted only at unreachable states")
    for s, t in sorted(res.deleted_edges):
        print(f"# deleted edge {s} {t}")
    for s in sorted(res.deleted_states):
        print(f"# deleted state {s}")
    _emit(format_program(res.program, res.removed_arcs), args.out)
    return EXIT_OK


def cmd_encode(args) -> int:
    m = parse_structure(_read(args.structure))
    text = _formula_text(args)
    eta = parse_atl(text) if isinstance(m, GameStructure) else parse_ctl(text)
    inst = compile_instance(m, eta, _options(args))
    _emit(to_dimacs(inst.cnf, inst.varmap, comments=[f"formula {text}"]), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    cnf = parse_dimacs(_read(args.dimacs))
    solver = args.solver or os.environ.get(SOLVER_ENV) or None
    res = run_solver(cnf, solver, seed=args.seed, max_conflicts=args.max_conflicts)
    _emit(format_result(res.assignment, cnf.num_vars), args.out)
    return EXIT_OK


def cmd_gen_random(args) -> int:
    ap = [a for a in args.ap.split(",") if a]
    if args.players:
        m = random_game(args.nodes, args.p, args.players.split(","), ap, args.seed)
    else:
        m = random_model(args.nodes, args.p, ap, args.seed)
    _emit(f"# random structure: nodes={args.nodes} p={args.p} seed={args.seed}\n" + format_structure(m), args.out)
    return EXIT_OK


def random_3sat(num_vars: int, num_clauses: int, seed: int) -> list[tuple[int, ...]]:
    rng = random.Random(seed)
    out = []
    for _ in range(num_clauses):
        vs = rng.sample(range(1, num_vars + 1), min(3, num_vars))
        out.append(tuple(v if rng.random() < 0.5 else -v for v in vs))
    return out


def cmd_gen_3sat(args) -> int:
    if args.cnf:
        cnf = parse_dimacs(_read(args.cnf))
        clauses, n = cnf.clauses, cnf.num_vars
        header = f"# 3sat reduction of {args.cnf}"
    else:
        if args.vars is None or args.clauses is None:
            raise UsageError("give --cnf FILE or both --vars and --clauses")
        clauses, n = random_3sat(args.vars, args.clauses, args.seed), args.vars
        header = f"# 3sat reduction: vars={args.vars} clauses={args.clauses} seed={args.seed}"
    try:
        m, eta = reduce_3sat(clauses, n)
    except RepairError as exc:
        raise UsageError(str(exc)) from None
    if args.formula_out:
        Path(args.formula_out).write_text(eta.text + "\n")
    _emit(f"{header}\n# formula: {eta.text}\n" + format_structure(m), args.out)
    return EXIT_OK


def bench_rows(nodes, p, formula, trials, seed, solver=None, max_conflicts=None):
    """Yield ``(n, propositions, clauses, seconds, repaired, failed)`` per node count.

    Sizes and times are means over ``trials`` random structures; every
    repaired structure is re-verified inside the engine before timing stops.
    """
    for n in nodes:
        text = formula or (BENCH_SMALL_FORMULA if n <= 30 else BENCH_FORMULA)
        eta = parse_ctl(text)
        props = clauses = 0
        secs = 0.0
        repaired = failed = 0
        for k in range(trials):
            m = random_model(n, p, ("p", "q"), seed * 1_000_003 + n * 101 + k)
            opts = RepairOptions(seed=seed, solver=solver, max_conflicts=max_conflicts)
            # always encodes and solves, even when m already satisfies eta
            t0 = time.perf_counter()
            inst = compile_instance(m, eta, opts)
            res = solve_instance(m, eta, inst, opts)
            secs += time.perf_counter() - t0
            props += inst.cnf.num_vars
            clauses += inst.cnf.num_clauses
            if isinstance(res, Failure):
                failed += 1
            else:
                repaired += 1
        yield n, props / trials, clauses / trials, secs / trials, repaired, failed, text


def cmd_bench(args) -> int:
    try:
        nodes = [int(x) for x in args.nodes.split(",") if x]
    except ValueError:
        raise UsageError(f"bad --nodes list {args.nodes!r}") from None
    if not nodes or min(nodes) < 1:
        raise UsageError("--nodes needs positive integers")
    if not 0 < args.p <= 1 or args.trials < 1:
        raise UsageError("--p must be in (0,1] and --trials at least 1")
    solver = args.solver or os.environ.get(SOLVER_ENV) or None
    print(f"# seed={args.seed} p={args.p} trials={args.trials}")
    print("nodes,propositions,clauses,seconds,repaired,failed,formula")
    for n, props, clauses, secs, rep, fail, text in bench_rows(
            nodes, args.p, args.formula, args.trials, args.seed, solver, args.max_conflicts):
        print(f"{n},{props:.0f},{clauses:.0f},{secs:.3f},{rep},{fail},\"{text}\"")
        sys.stdout.flush()
    return EXIT_OK


# --- parser ---------------------------------------------------------------------


def _add_formula(p) -> None:
    p.add_argument("formula", nargs="?", help="formula text")
    p.add_argument("--formula-file", "-F", help="read the formula from a file")


def _add_solver(p) -> None:
    p.add_argument("--solver", help=f"external DIMACS solver command (default: ${SOLVER_ENV} or embedded)")
    p.add_argument("--seed", type=int, default=0, help="seed for the embedded solver (default 0)")
    p.add_argument("--max-conflicts", type=int, help="conflict budget for the embedded solver")


def _add_repair_flags(p) -> None:
    _add_solver(p)
    p.add_argument("--uncontrollable", metavar="FILE", help="edges that must be kept, one '<s> <t>' per line")
    p.add_argument("--symmetry", metavar="FILE", help="'state a b' / 'edge a b c d' pairing lines")
    p.add_argument("--constraint", metavar="EXPR", action="append",
                   help="extra constraint over E(s,t) and N(s) atoms (repeatable)")
    p.add_argument("--allow-state-deletion", action="store_true", help="add state-deletion clauses")
    p.add_argument("--families", metavar="FILE", help="'<family> <s> <t>' lines")
    p.add_argument("--emit-dimacs", metavar="PATH", help="also write the repair CNF in DIMACS form")
    p.add_argument("--out", "-o", metavar="PATH", help="write the result here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctlrepair", description="CTL/ATL model repair via SAT")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="model check a structure")
    p.add_argument("structure")
    _add_formula(p)
    p.add_argument("--labels", action="store_true", help="print the state/sub-formula labeling")
    p.set_defaults(func=cmd_check)

    for name, func, what in (("repair", cmd_repair, "Kripke structure"),
                             ("repair-atl", cmd_repair_atl, "game structure")):
        p = sub.add_parser(name, help=f"repair a {what}")
        p.add_argument("structure")
        _add_formula(p)
        _add_repair_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("skeleton-repair", help="repair a synchronization-skeleton program")
    p.add_argument("program")
    _add_formula(p)
    _add_repair_flags(p)
    p.set_defaults(func=cmd_skeleton_repair)

    p = sub.add_parser("encode", help="write the repair formula as DIMACS")
    p.add_argument("structure")
    _add_formula(p)
    _add_repair_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("solve", help="solve a DIMACS CNF")
    p.add_argument("dimacs")
    _add_solver(p)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen-random", help="random Kripke (or game) structure")
    p.add_argument("--nodes", "-n", type=int, required=True)
    p.add_argument("--p", type=float, default=0.1, help="edge probability")
    p.add_argument("--ap", default="p,q", help="comma-separated propositions")
    p.add_argument("--players", help="comma-separated players; makes a game structure")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_gen_random)

    p = sub.add_parser("gen-3sat", help="structure and formula from a 3SAT instance")
    p.add_argument("--cnf", help="DIMACS file with the clauses")
    p.add_argument("--vars", type=int)
    p.add_argument("--clauses", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--formula-out", help="write the formula to this file")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_gen_3sat)

    p = sub.add_parser("bench", help="random-structure benchmark, CSV on stdout")
    p.add_argument("--nodes", default="30,40,50,60,70,80", help="comma-separated node counts")
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--formula", help="formula for every row (default: per-size benchmark formulas)")
    p.add_argument("--trials", type=int, default=1)
    _add_solver(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "max_conflicts", None) is not None and args.max_conflicts < 0:
        parser.error("--max-conflicts must be non-negative")
    try:
        return args.func(args)
    except ResourceLimitExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (UsageError, StructureError, FormulaError, SkeletonError, DimacsError, EncodingError,
            RepairError, CheckError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalVerificationError as exc:  # pragma: no cover - bug sentinel
        print(f"internal error: {exc}", file=sys.stderr)
        return 70


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
