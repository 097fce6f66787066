import random
from pathlib import Path

import pytest

from ctlrepair import formula as F
from ctlrepair.kripke import GameStructure, KripkeStructure

FIXTURES = Path(__file__).parent / "fixtures"
TOOLS = Path(__file__).parent / "tools"

ATOMS = (F.Prop("p"), F.Prop("q"))


def sec51():
    """Three states s, t, u: s -> t, s -> u, t -> s, u -> s."""
    return KripkeStructure.build(
        "s", ["s", "t", "u"], [("s", "t"), ("s", "u"), ("t", "s"), ("u", "s")],
        {"s": {"p", "q"}, "t": {"q"}, "u": {"p"}}, ["p", "q"])


UNARY = (F.Not, F.AX, F.EX, F.AF, F.EF, F.AG, F.EG)
BINARY = (F.And, F.Or, F.Implies, F.AU, F.EU, F.AV, F.EV)


def random_formula(rng: random.Random, depth: int, atoms=ATOMS, consts=True):
    """Random CTL formula of height at most ``depth``."""
    if depth == 0 or rng.random() < 0.25:
        if consts and rng.random() < 0.1:
            return rng.choice((F.TRUE, F.FALSE))
        return rng.choice(atoms)
    if rng.random() < 0.45:
        return rng.choice(UNARY)(random_formula(rng, depth - 1, atoms, consts))
    op = rng.choice(BINARY)
    return op(random_formula(rng, depth - 1, atoms, consts), random_formula(rng, depth - 1, atoms, consts))


def random_universal(rng: random.Random, depth: int, atoms=ATOMS):
    """Universal-fragment formula: literals, &, |, AX, AG, A[ V ] (no EX/EV after desugaring)."""
    if depth == 0 or rng.random() < 0.3:
        a = rng.choice(atoms)
        return F.Not(a) if rng.random() < 0.4 else a
    k = rng.randrange(5)
    sub = lambda: random_universal(rng, depth - 1, atoms)  # noqa: E731
    if k == 0:
        return F.And(sub(), sub())
    if k == 1:
        return F.Or(sub(), sub())
    if k == 2:
        return F.AX(sub())
    if k == 3:
        return F.AG(sub())
    return F.AV(sub(), sub())


def random_structure(rng: random.Random, n: int, max_out: int = 3, ap=("p", "q"), max_edges=None):
    names = [f"s{i}" for i in range(n)]
    edges = set()
    for a in names:
        k = rng.randint(1, min(max_out, n))
        for b in rng.sample(names, k):
            edges.add((a, b))
    if max_edges is not None:
        while len(edges) > max_edges:
            outs = {}
            for a, b in edges:
                outs.setdefault(a, []).append(b)
            cands = sorted(e for e in edges if len(outs[e[0]]) > 1)
            if not cands:
                break
            edges.discard(rng.choice(cands))
    labels = {s: {x for x in ap if rng.random() < 0.5} for s in names}
    return KripkeStructure.build(names[0], names, edges, labels, ap)


def random_game_structure(rng: random.Random, n: int, players=("1", "2"), **kw):
    m = random_structure(rng, n, **kw)
    return GameStructure(m, frozenset(players), {s: rng.choice(players) for s in m.states})


def ctl_to_atl(f, universal, existential):
    """Replace A/E path quantifiers by the given coalitions."""
    t = type(f)
    if t in (F.Const, F.Prop):
        return f
    if t is F.Not:
        return F.Not(ctl_to_atl(f.arg, universal, existential))
    if t in (F.And, F.Or, F.Implies):
        return t(ctl_to_atl(f.left, universal, existential), ctl_to_atl(f.right, universal, existential))
    unary = {F.AX: (universal, F.CoalX), F.EX: (existential, F.CoalX), F.AF: (universal, F.CoalF),
             F.EF: (existential, F.CoalF), F.AG: (universal, F.CoalG), F.EG: (existential, F.CoalG)}
    if t in unary:
        who, cls = unary[t]
        return cls(who, ctl_to_atl(f.arg, universal, existential))
    binary = {F.AU: (universal, F.CoalU), F.EU: (existential, F.CoalU),
              F.AV: (universal, F.CoalV), F.EV: (existential, F.CoalV)}
    who, cls = binary[t]
    return cls(who, ctl_to_atl(f.left, universal, existential), ctl_to_atl(f.right, universal, existential))


@pytest.fixture
def m51():
    return sec51()


@pytest.fixture(scope="session")
def barrier():
    """Speculative barrier program, its formula and its (timed) repair."""
    import time

    from ctlrepair.skeleton import load_program, repair_program

    prog = load_program(FIXTURES / "barrier_speculative.prog")
    eta = F.parse((FIXTURES / "barrier.ctl").read_text())
    t0 = time.perf_counter()
    res = repair_program(prog, eta)
    return prog, eta, res, time.perf_counter() - t0


# --- acceptance summary -----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
