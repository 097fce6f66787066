"""Circuit-to-CNF conversion (full Tseitin) and DIMACS interchange."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import circuit as C
from .circuit import Expr, PropVar


class DimacsError(ValueError):
    pass


@dataclass
class CnfFormula:
    num_vars: int
    clauses: list[tuple[int, ...]]

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def satisfied_by(self, assignment) -> bool:
        return all(any(assignment.lit(l) for l in c) for c in self.clauses)


@dataclass
class VarMap:
    """Original propositions occupy 1..len(index); auxiliaries follow."""

    index: dict[PropVar, int] = field(default_factory=dict)
    names: list[PropVar | None] = field(default_factory=lambda: [None])
    gates: dict[int, Expr] = field(default_factory=dict)

    def __getitem__(self, p: PropVar) -> int:
        return self.index[p]

    def __contains__(self, p) -> bool:
        return p in self.index

    @property
    def num_original(self) -> int:
        return len(self.index)

    def decode(self, assignment) -> dict[PropVar, bool]:
        return {p: assignment[i] for p, i in self.index.items()}


class _Tseitin:
    def __init__(self, declared):
        self.vm = VarMap()
        self.clauses: list[tuple[int, ...]] = []
        self.lits: dict[Expr, int] = {}
        self.n = 0
        for p in declared:
            self._orig(p)

    def _orig(self, p: PropVar) -> int:
        i = self.vm.index.get(p)
        if i is None:
            self.n += 1
            i = self.vm.index[p] = self.n
            self.vm.names.append(p)
        return i

    def _aux(self, gate: Expr) -> int:
        self.n += 1
        self.vm.names.append(None)
        self.vm.gates[self.n] = gate
        return self.n

    def clause(self, lits) -> None:
        seen = []
        for l in lits:
            if -l in seen:
                return
            if l not in seen:
                seen.append(l)
        self.clauses.append(tuple(seen))

    def lit(self, e: Expr) -> int:
        got = self.lits.get(e)
        if got is not None:
            return got
        op = e.op
        if op == "var":
            r = self._orig(e.args[0])
        elif op == "not":
            r = -self.lit(e.args[0])
        elif op == "const":
            r = self._aux(e)
            self.clause([r] if e.args[0] else [-r])
        else:
            r = self._aux(e)
            self.define(r, e)
        self.lits[e] = r
        return r

    def define(self, out: int, e: Expr) -> None:
        """Clauses for ``out <-> e`` where ``e`` is a gate."""
        op = e.op
        if op == "and":
            kids = [self.lit(c) for c in e.args]
            for k in kids:
                self.clause([-out, k])
            self.clause([out] + [-k for k in kids])
        elif op == "or":
            kids = [self.lit(c) for c in e.args]
            for k in kids:
                self.clause([out, -k])
            self.clause([-out] + kids)
        elif op == "iff":
            a, b = self.lit(e.args[0]), self.lit(e.args[1])
            self.clause([-out, -a, b])
            self.clause([-out, a, -b])
            self.clause([out, a, b])
            self.clause([out, -a, -b])
        else:
            k = self.lit(e)
            self.clause([-out, k])
            self.clause([out, -k])

    def require(self, e: Expr) -> None:
        op = e.op
        if op == "and":
            for c in e.args:
                self.require(c)
        elif op == "const":
            if not e.args[0]:
                self.clauses.append(())
        elif op in ("var", "not"):
            self.clause([self.lit(e)])
        elif op == "or":
            self.clause([self.lit(c) for c in e.args])
        elif op == "iff":
            a, b = e.args
            # a top-level definition "x <-> gate" makes x the gate's output
            for out_e, gate in ((a, b), (b, a)):
                if out_e.op in ("var", "not") and gate.op in ("and", "or", "iff") and gate not in self.lits:
                    out = self.lit(out_e)
                    self.lits[gate] = out
                    self.define(out, gate)
                    return
            la, lb = self.lit(a), self.lit(b)
            self.clause([-la, lb])
            self.clause([la, -lb])


def tseitin(e, declared=None) -> tuple[CnfFormula, VarMap]:
    """Equisatisfiable CNF for a circuit (or an :class:`Encoding`).

    Declared propositions (by default, those of the encoding, or the
    circuit's leaves in traversal order) are numbered first.  Gates get
    auxiliary variables defined by full biconditional clauses, so every
    auxiliary is functionally determined by the original variables.
    """
    from .encoder import Encoding

    if isinstance(e, Encoding):
        if declared is None:
            declared = list(e.variables)
        conjuncts = [c for _, c in e.conjuncts()]
    else:
        conjuncts = [e]
        if declared is None:
            declared = C.variables(e)
    t = _Tseitin(declared)
    for c in conjuncts:
        t.require(c)
    return CnfFormula(t.n, t.clauses), t.vm


# --- DIMACS ---------------------------------------------------------------------


def to_dimacs(cnf: CnfFormula, varmap: VarMap | None = None, comments=()) -> str:
    lines = [f"c {c}" for c in comments]
    if varmap is not None:
        for p, i in varmap.index.items():
            lines.append(f"c var {i} {p}")
    lines.append(f"p cnf {cnf.num_vars} {cnf.num_clauses}")
    lines.extend(" ".join(map(str, c)) + (" 0" if c else "0") for c in cnf.clauses)
    return "\n".join(lines) + "\n"


def parse_dimacs(text: str) -> CnfFormula:
    num_vars = num_clauses = None
    clauses: list[tuple[int, ...]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: bad problem line {line!r}")
            num_vars, num_clauses = int(parts[2]), int(parts[3])
            continue
        if num_vars is None:
            raise DimacsError(f"line {lineno}: clause before problem line")
        for tok in line.split():
            try:
                v = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad literal {tok!r}") from None
            if abs(v) > num_vars:
                raise DimacsError(f"line {lineno}: literal {v} exceeds variable count {num_vars}")
            if v == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append(v)
    if num_vars is None:
        raise DimacsError("missing problem line")
    if current:
        clauses.append(tuple(current))
    if len(clauses) != num_clauses:
        raise DimacsError(f"header declares {num_clauses} clauses, found {len(clauses)}")
    return CnfFormula(num_vars, clauses)


def format_result(assignment, num_vars: int | None = None) -> str:
    """Solver-result text: ``s`` line plus ``v`` lines (``None`` means UNSAT)."""
    if assignment is None:
        return "s UNSATISFIABLE\n"
    n = assignment.num_vars if num_vars is None else num_vars
    lits = [i if assignment[i] else -i for i in range(1, n + 1)] + [0]
    lines = ["s SATISFIABLE"]
    for k in range(0, len(lits), 10):
        lines.append("v " + " ".join(map(str, lits[k:k + 10])))
    return "\n".join(lines) + "\n"


def from_dimacs_result(text: str, num_vars: int | None = None):
    """Parse solver output; returns an Assignment, or ``None`` for UNSAT.

    Variables the solver leaves out are set false; callers verify the
    result against the formula anyway.
    """
    from .solver import Assignment

    status = None
    values: dict[int, bool] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("s "):
            word = line[2:].strip()
            if word == "SATISFIABLE":
                status = True
            elif word == "UNSATISFIABLE":
                status = False
            else:
                raise DimacsError(f"unknown solver status {word!r}")
        elif line.startswith("v ") or line == "v":
            for tok in line[1:].split():
                try:
                    v = int(tok)
                except ValueError:
                    raise DimacsError(f"bad literal {tok!r} in solver output") from None
                if v:
                    values[abs(v)] = v > 0
    if status is None:
        raise DimacsError("solver output has no 's' line")
    if not status:
        return None
    n = max(values, default=0) if num_vars is None else num_vars
    return Assignment([False] + [values.get(i, False) for i in range(1, n + 1)])
