"""SAT solving: an embedded CDCL solver, an external-solver adapter and
projected model enumeration.

Every satisfying assignment, whichever solver produced it, is checked
against the input clauses before it is returned.
"""

from __future__ import annotations

import heapq
import os
import random
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Iterable, Sequence

from .cnf import CnfFormula, DimacsError, from_dimacs_result, to_dimacs


class SolverError(RuntimeError):
    """The solver misbehaved (crash, garbage output, or a bad model)."""


class ResourceLimitExceeded(RuntimeError):
    """The conflict budget ran out before the instance was decided."""


class EnumerationLimitExceeded(RuntimeError):
    pass


class Assignment:
    """Total assignment; ``values[v]`` for variable ``v`` (index 0 unused)."""

    __slots__ = ("values",)

    def __init__(self, values: Sequence[bool]):
        self.values = list(values)

    @property
    def num_vars(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, v: int) -> bool:
        return self.values[v]

    def lit(self, l: int) -> bool:
        return self.values[l] if l > 0 else not self.values[-l]

    def __eq__(self, other):
        return isinstance(other, Assignment) and self.values == other.values

    def __repr__(self):
        return "Assignment(" + " ".join(str(v if b else -v) for v, b in enumerate(self.values) if v) + ")"


@dataclass(frozen=True)
class SolveResult:
    assignment: Assignment | None

    @property
    def sat(self) -> bool:
        return self.assignment is not None

    @property
    def status(self) -> str:
        return "SAT" if self.sat else "UNSAT"


def verify(cnf: CnfFormula, assignment: Assignment) -> bool:
    if assignment.num_vars < cnf.num_vars:
        return False
    return cnf.satisfied_by(assignment)


# --- embedded CDCL --------------------------------------------------------------


class _CDCL:
    # literal encoding: variable v -> 2v (positive), 2v+1 (negative)

    def __init__(self, cnf: CnfFormula, seed: int, max_conflicts: int | None, priority=()):
        n = cnf.num_vars
        self.n = n
        self.max_conflicts = max_conflicts
        rng = random.Random(seed)
        self.value = [0] * (2 * n + 2)  # per literal: 1 true, -1 false, 0 unassigned
        self.level = [0] * (n + 1)
        self.reason: list[int] = [-1] * (n + 1)
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.watches: list[list[int]] = [[] for _ in range(2 * n + 2)]
        self.clauses: list[list[int] | None] = []
        self.learnt_lbd: dict[int, int] = {}
        # tiny seeded jitter breaks activity ties reproducibly
        self.activity = [0.0] + [rng.random() * 1e-5 for _ in range(n)]
        self.var_inc = 1.0
        self.polarity = [False] * (n + 1)
        # branching prefers tier-0 variables, then falls back to the rest
        self.tier = [1] * (n + 1)
        for v in priority:
            if 1 <= v <= n:
                self.tier[v] = 0
        self.heap = [(self.tier[v], -self.activity[v], v) for v in range(1, n + 1)]
        heapq.heapify(self.heap)
        # activity of v's live heap entry, or None; stale entries are skipped
        self.in_heap: list[float | None] = list(self.activity)
        self.seen = [False] * (n + 1)
        self.ok = True
        self.units: list[int] = []
        for c in cnf.clauses:
            lits = []
            for x in c:
                l = 2 * x if x > 0 else 2 * (-x) + 1
                if l ^ 1 in lits:
                    lits = None
                    break
                if l not in lits:
                    lits.append(l)
            if lits is None:
                continue
            if not lits:
                self.ok = False
            elif len(lits) == 1:
                self.units.append(lits[0])
            else:
                self._attach(lits)

    def _attach(self, lits: list[int]) -> int:
        ci = len(self.clauses)
        self.clauses.append(lits)
        self.watches[lits[0]].append(ci)
        self.watches[lits[1]].append(ci)
        return ci

    def _assign(self, lit: int, reason: int) -> None:
        v = lit >> 1
        self.value[lit] = 1
        self.value[lit ^ 1] = -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self) -> int:
        """Unit propagation; returns a conflicting clause index or -1."""
        value = self.value
        watches = self.watches
        clauses = self.clauses
        trail = self.trail
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            false_lit = p ^ 1
            ws = watches[false_lit]
            i = j = 0
            end = len(ws)
            while i < end:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c is None:
                    continue
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                if value[first] == 1:
                    ws[j] = ci
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if value[lk] != -1:
                        c[1] = lk
                        c[k] = false_lit
                        watches[lk].append(ci)
                        break
                else:
                    ws[j] = ci
                    j += 1
                    if value[first] == -1:
                        while i < end:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        return ci
                    self._assign(first, ci)
            del ws[j:]
        return -1

    def _bump(self, v: int) -> None:
        a = self.activity[v] + self.var_inc
        self.activity[v] = a
        if a > 1e100:
            self.activity = [x * 1e-100 for x in self.activity]
            self.var_inc *= 1e-100
            free = [u for u in range(1, self.n + 1) if self.value[2 * u] == 0]
            self.heap = [(self.tier[u], -self.activity[u], u) for u in free]
            heapq.heapify(self.heap)
            self.in_heap = [None] * (self.n + 1)
            for u in free:
                self.in_heap[u] = self.activity[u]
        elif self.value[2 * v] == 0:
            heapq.heappush(self.heap, (self.tier[v], -a, v))
            self.in_heap[v] = a

    def _analyze(self, confl: int) -> tuple[list[int], int]:
        seen = self.seen
        level = self.level
        current = len(self.trail_lim)
        learnt = [0]
        counter = 0
        p = -1
        idx = len(self.trail) - 1
        touched = []
        while True:
            c = self.clauses[confl]
            for q in (c if p == -1 else c[1:]):
                v = q >> 1
                if not seen[v] and level[v] > 0:
                    seen[v] = True
                    touched.append(v)
                    self._bump(v)
                    if level[v] >= current:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[self.trail[idx] >> 1]:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            confl = self.reason[p >> 1]
            counter -= 1
            if counter == 0:
                break
            # the reason clause keeps its implied literal at position 0
            rc = self.clauses[confl]
            if rc[0] != p:
                k = rc.index(p)
                rc[0], rc[k] = rc[k], rc[0]
        learnt[0] = p ^ 1
        # drop literals implied by the rest of the clause (local minimisation)
        keep = [learnt[0]]
        for q in learnt[1:]:
            r = self.reason[q >> 1]
            if r == -1 or any(not seen[x >> 1] and level[x >> 1] > 0 for x in self.clauses[r][1:]):
                keep.append(q)
        learnt = keep
        for v in touched:
            seen[v] = False
        if len(learnt) == 1:
            back = 0
        else:
            hi = max(range(1, len(learnt)), key=lambda k: level[learnt[k] >> 1])
            learnt[1], learnt[hi] = learnt[hi], learnt[1]
            back = level[learnt[1] >> 1]
        self.var_inc /= 0.95
        return learnt, back

    def _cancel(self, lvl: int) -> None:
        if len(self.trail_lim) <= lvl:
            return
        stop = self.trail_lim[lvl]
        value = self.value
        for k in range(len(self.trail) - 1, stop - 1, -1):
            lit = self.trail[k]
            v = lit >> 1
            value[lit] = 0
            value[lit ^ 1] = 0
            self.polarity[v] = not (lit & 1)
            self.reason[v] = -1
            a = self.activity[v]
            if self.in_heap[v] != a:
                heapq.heappush(self.heap, (self.tier[v], -a, v))
                self.in_heap[v] = a
        del self.trail[stop:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)

    def _decide(self) -> int:
        heap = self.heap
        value = self.value
        act = self.activity
        while heap:
            _, a, v = heapq.heappop(heap)
            if -a != act[v]:
                continue
            self.in_heap[v] = None
            if value[2 * v] == 0:
                return 2 * v if self.polarity[v] else 2 * v + 1
        for v in range(1, self.n + 1):
            if value[2 * v] == 0:
                return 2 * v if self.polarity[v] else 2 * v + 1
        return -1

    def _reduce(self) -> None:
        locked = {self.reason[lit >> 1] for lit in self.trail}
        cands = [ci for ci, lbd in self.learnt_lbd.items() if lbd > 2 and ci not in locked]
        cands.sort(key=lambda ci: (self.learnt_lbd[ci], len(self.clauses[ci])), reverse=True)
        for ci in cands[: len(cands) // 2]:
            self.clauses[ci] = None
            del self.learnt_lbd[ci]

    def solve(self) -> list[bool] | None:
        if not self.ok:
            return None
        for lit in self.units:
            if self.value[lit] == -1:
                return None
            if self.value[lit] == 0:
                self._assign(lit, -1)
        if self._propagate() != -1:
            return None
        conflicts = 0
        restart_at = 100.0
        since_restart = 0
        max_learnts = max(1000.0, len(self.clauses) / 3)
        while True:
            confl = self._propagate()
            if confl != -1:
                conflicts += 1
                since_restart += 1
                if self.max_conflicts is not None and conflicts > self.max_conflicts:
                    raise ResourceLimitExceeded(f"conflict budget of {self.max_conflicts} exhausted")
                if not self.trail_lim:
                    return None
                learnt, back = self._analyze(confl)
                self._cancel(back)
                if len(learnt) == 1:
                    self._assign(learnt[0], -1)
                else:
                    lbd = len({self.level[l >> 1] for l in learnt})
                    ci = self._attach(learnt)
                    self.learnt_lbd[ci] = lbd
                    self._assign(learnt[0], ci)
                continue
            if since_restart >= restart_at:
                since_restart = 0
                restart_at *= 1.5
                self._cancel(0)
            if len(self.learnt_lbd) - len(self.trail) >= max_learnts:
                self._reduce()
                max_learnts *= 1.1
            lit = self._decide()
            if lit == -1:
                return [False] + [self.value[2 * v] == 1 for v in range(1, self.n + 1)]
            self.trail_lim.append(len(self.trail))
            self._assign(lit, -1)


def solve(cnf: CnfFormula, seed: int = 0, max_conflicts: int | None = None, priority=()) -> SolveResult:
    """Decide ``cnf`` with the embedded CDCL solver.

    Deterministic for a given ``seed``.  Variables in ``priority`` are
    branched on before any other; this only affects speed.  Raises
    :class:`ResourceLimitExceeded` when ``max_conflicts`` is hit.
    """
    model = _CDCL(cnf, seed, max_conflicts, priority).solve()
    if model is None:
        return SolveResult(None)
    a = Assignment(model)
    if not verify(cnf, a):
        raise SolverError("embedded solver produced an assignment that violates the formula")
    return SolveResult(a)


# --- external solvers -----------------------------------------------------------

SOLVER_ENV = "CTLREPAIR_SOLVER"


def solve_external(cnf: CnfFormula, command: str, timeout: float | None = None) -> SolveResult:
    """Run a DIMACS solver.

    ``command`` is a shell-style template; ``{}`` is replaced by the CNF
    file path, otherwise the path is appended.  Exit codes 0, 10 and 20
    are accepted; the ``s``/``v`` lines on stdout carry the answer.
    """
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "instance.cnf")
        with open(path, "w", encoding="ascii") as fh:
            fh.write(to_dimacs(cnf))
        argv = shlex.split(command)
        if any("{}" in a for a in argv):
            argv = [a.replace("{}", path) for a in argv]
        else:
            argv.append(path)
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise SolverError(f"could not run external solver: {exc}") from exc
    if proc.returncode not in (0, 10, 20):
        raise SolverError(f"external solver exited with status {proc.returncode}: {proc.stderr.strip()}")
    try:
        a = from_dimacs_result(proc.stdout, cnf.num_vars)
    except DimacsError as exc:
        raise SolverError(f"unparseable solver output: {exc}") from exc
    if a is None:
        return SolveResult(None)
    if not verify(cnf, a):
        raise SolverError("external solver returned an assignment that violates the formula")
    return SolveResult(a)


def run_solver(cnf: CnfFormula, solver: str | None = None, seed: int = 0,
               max_conflicts: int | None = None, priority=()) -> SolveResult:
    """Dispatch on ``solver``: ``None``/"embedded" or an external command."""
    if solver in (None, "", "embedded"):
        return solve(cnf, seed=seed, max_conflicts=max_conflicts, priority=priority)
    return solve_external(cnf, solver)


def enumerate_projected(cnf: CnfFormula, variables: Iterable[int], limit: int = 1000,
                        solver: str | None = None, seed: int = 0) -> list[dict[int, bool]]:
    """All distinct projections of models onto ``variables``, via blocking clauses.

    Raises :class:`EnumerationLimitExceeded` if more than ``limit`` exist.
    """
    if limit < 1:
        raise ValueError("limit must be at least 1")
    vs = sorted(set(variables))
    for v in vs:
        if not 1 <= v <= cnf.num_vars:
            raise ValueError(f"variable {v} is not in the formula")
    work = CnfFormula(cnf.num_vars, list(cnf.clauses))
    found: list[dict[int, bool]] = []
    while True:
        res = run_solver(work, solver, seed)
        if not res.sat:
            return found
        if len(found) == limit:
            raise EnumerationLimitExceeded(f"more than {limit} projected models")
        proj = {v: res.assignment[v] for v in vs}
        found.append(proj)
        if not vs:
            return found
        work.clauses.append(tuple(-v if b else v for v, b in proj.items()))
