"""Independent reference implementations used to validate the package.

Nothing here reuses the package's checker, encoder or solver.  The CTL
oracle evaluates the surface syntax directly (graph search for EU, SCCs
for EG); the ATL oracle enumerates memoryless coalition strategies;
SAT is decided by truth tables; repair by trying every edge subset.
"""

from __future__ import annotations

import functools
import itertools

from ctlrepair import formula as F

# --- structures as plain tuples ---------------------------------------------------


class Graph:
    """Minimal explicit structure: initial state, successor map, labels."""

    def __init__(self, initial, succ, labels, turn=None):
        self.initial = initial
        self.succ = {s: tuple(sorted(ts)) for s, ts in succ.items()}
        self.labels = labels
        self.turn = turn or {}

    @classmethod
    def of(cls, m, edges=None):
        base = getattr(m, "base", m)
        edges = base.transitions if edges is None else edges
        succ = {s: [] for s in base.states}
        for a, b in edges:
            succ[a].append(b)
        # keep only what is reachable from the initial state
        seen, stack = {base.initial}, [base.initial]
        while stack:
            s = stack.pop()
            for t in succ[s]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        succ = {s: [t for t in succ[s]] for s in seen}
        labels = {s: set(base.labels[s]) for s in seen}
        turn = {s: m.turn[s] for s in seen} if hasattr(m, "turn") else None
        return cls(base.initial, succ, labels, turn)

    @property
    def states(self):
        return sorted(self.succ)

    def total(self):
        return all(self.succ[s] for s in self.succ)


# --- CTL -----------------------------------------------------------------------


def _eu(g: Graph, a: set, b: set) -> set:
    """States with a path staying in ``a`` until reaching ``b`` (backward search)."""
    pred = {s: [] for s in g.succ}
    for s, ts in g.succ.items():
        for t in ts:
            pred[t].append(s)
    out = set(b)
    stack = list(b)
    while stack:
        t = stack.pop()
        for s in pred[t]:
            if s not in out and s in a:
                out.add(s)
                stack.append(s)
    return out


def _eg(g: Graph, a: set) -> set:
    """States with an infinite path inside ``a``: reach a non-trivial SCC of ``a``."""
    sub = {s: [t for t in g.succ[s] if t in a] for s in a}
    index, low, on, stack, sccs = {}, {}, set(), [], []
    counter = [0]

    def strong(v):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on.add(v)
        for w in sub[v]:
            if w not in index:
                strong(w)
                low[v] = min(low[v], low[w])
            elif w in on:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on.discard(w)
                comp.append(w)
                if w == v:
                    break
            sccs.append(comp)

    for v in sorted(a):
        if v not in index:
            strong(v)
    core = set()
    for comp in sccs:
        if len(comp) > 1 or comp[0] in sub[comp[0]]:
            core |= set(comp)
    return _eu(g, a, core)


def sat_ctl(g: Graph, f) -> set:
    """Set of states satisfying CTL formula ``f`` (surface syntax)."""
    S = set(g.succ)
    t = type(f)
    if t is F.Const:
        return set(S) if f.value else set()
    if t is F.Prop:
        return {s for s in S if f.name in g.labels[s]}
    if t is F.Not:
        return S - sat_ctl(g, f.arg)
    if t is F.And:
        return sat_ctl(g, f.left) & sat_ctl(g, f.right)
    if t is F.Or:
        return sat_ctl(g, f.left) | sat_ctl(g, f.right)
    if t is F.Implies:
        return (S - sat_ctl(g, f.left)) | sat_ctl(g, f.right)
    if t is F.EX:
        a = sat_ctl(g, f.arg)
        return {s for s in S if any(x in a for x in g.succ[s])}
    if t is F.AX:
        a = sat_ctl(g, f.arg)
        return {s for s in S if all(x in a for x in g.succ[s])}
    if t is F.EU:
        return _eu(g, sat_ctl(g, f.left), sat_ctl(g, f.right))
    if t is F.EF:
        return _eu(g, S, sat_ctl(g, f.arg))
    if t is F.EG:
        return _eg(g, sat_ctl(g, f.arg))
    if t is F.AG:
        return S - _eu(g, S, S - sat_ctl(g, f.arg))
    if t is F.AF:
        return S - _eg(g, S - sat_ctl(g, f.arg))
    if t is F.AU:
        a, b = sat_ctl(g, f.left), sat_ctl(g, f.right)
        nb = S - b
        bad = _eu(g, nb, (S - a) & nb) | _eg(g, nb)
        return S - bad
    if t is F.EV:
        # psi holds until and including a phi-state, or forever
        a, b = sat_ctl(g, f.left), sat_ctl(g, f.right)
        return _eu(g, b, a & b) | _eg(g, b)
    if t is F.AV:
        a, b = sat_ctl(g, f.left), sat_ctl(g, f.right)
        return S - _eu(g, S - a, S - b)
    raise TypeError(f"not CTL: {f}")


def holds_ctl(g: Graph, f) -> bool:
    return g.initial in sat_ctl(g, f)


# --- ATL (turn-based) -----------------------------------------------------------


def _strategies(g: Graph, coalition):
    """Every memoryless choice of one successor at each coalition-owned state."""
    owned = [s for s in g.states if g.turn[s] in coalition]
    for pick in itertools.product(*(g.succ[s] for s in owned)):
        succ = dict(g.succ)
        for s, t in zip(owned, pick):
            succ[s] = (t,)
        yield Graph(g.initial, succ, g.labels, g.turn)


def sat_atl(g: Graph, f) -> set:
    """Coalition modalities by strategy enumeration (memoryless strategies
    suffice for next, until and release objectives in turn-based games)."""
    S = set(g.succ)
    t = type(f)
    if t in (F.Const, F.Prop):
        return sat_ctl(g, f)
    if t is F.Not:
        return S - sat_atl(g, f.arg)
    if t in (F.And, F.Or, F.Implies):
        a, b = sat_atl(g, f.left), sat_atl(g, f.right)
        return {F.And: a & b, F.Or: a | b, F.Implies: (S - a) | b}[t]
    if not isinstance(f, F._Coalition):
        raise TypeError(f"not ATL: {f}")
    coal = set(f.agents)
    # nested sub-formulas become fresh atoms
    if isinstance(f, F.CoalX):
        inner = {"a": sat_atl(g, f.arg)}
        a = F.Prop("__a")
        path = {F.CoalF: F.AF(a), F.CoalG: F.AG(a)}.get(t, F.AX(a))
    else:
        inner = {"a": sat_atl(g, f.left), "b": sat_atl(g, f.right)}
        a, b = F.Prop("__a"), F.Prop("__b")
        path = F.AU(a, b) if t is F.CoalU else F.AV(a, b)
    labels = {s: set(g.labels[s]) | {f"__{k}" for k, v in inner.items() if s in v} for s in S}
    h = Graph(g.initial, g.succ, labels, g.turn)
    out = set()
    for s in S:
        for strat in _strategies(h, coal):
            if s in sat_ctl(strat, path):
                out.add(s)
                break
    return out


def holds_atl(g: Graph, f) -> bool:
    return g.initial in sat_atl(g, f)


# --- SAT -----------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _columns(num_vars: int):
    """Truth-table column of each variable as a 2**n-bit integer.

    Row r assigns variable v the bit (r >> (v-1)) & 1.
    """
    rows = 1 << num_vars
    full = (1 << rows) - 1
    cols = [0]
    for v in range(num_vars):
        period = 1 << (v + 1)
        pattern = ((1 << (1 << v)) - 1) << (1 << v)  # 2**v zeros then 2**v ones
        repeat = full // ((1 << period) - 1)  # a one every `period` bits
        cols.append(pattern * repeat)
    return cols, full


def truth_table_sat(num_vars: int, clauses) -> bool:
    """Exhaustive check, evaluating all 2**n rows at once with bit masks."""
    cols, full = _columns(num_vars)
    rows = full
    for c in clauses:
        m = 0
        for l in c:
            m |= cols[l] if l > 0 else full ^ cols[-l]
        rows &= m
        if not rows:
            return False
    return True


def truth_table_models(num_vars: int, clauses):
    for bits in itertools.product((False, True), repeat=num_vars):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            yield bits


# --- repair --------------------------------------------------------------------


def repairs(m, f, required=(), atl=False):
    """Every edge subset whose induced reachable substructure is total and satisfies ``f``.

    Yields the retained edge sets restricted to reachable sources.
    """
    base = getattr(m, "base", m)
    edges = sorted(base.transitions)
    if len(edges) > 16:
        raise ValueError("oracle limited to 16 edges")
    required = set(required)
    seen = set()
    for bits in itertools.product((False, True), repeat=len(edges)):
        kept = {e for e, b in zip(edges, bits) if b}
        if not required <= kept:
            continue
        g = Graph.of(m, kept)
        if not g.total():
            continue
        key = frozenset((s, t) for s in g.succ for t in g.succ[s])
        if key in seen:
            continue
        seen.add(key)
        ok = holds_atl(g, f) if atl else holds_ctl(g, f)
        if ok:
            yield key


def repairable(m, f, required=(), atl=False) -> bool:
    return next(repairs(m, f, required, atl), None) is not None


