import itertools

import pytest

from ctlrepair.checker import check_ctl
from ctlrepair.engine import RepairOptions
from ctlrepair.formula import parse
from ctlrepair.kripke import is_total
from ctlrepair.skeleton import (
    SkeletonError, build_global_stg, format_program, load_program, parse_program,
    repair_program, validate_arw,
)

from conftest import FIXTURES
from oracles import Graph, holds_ctl

TWO = """
process 1
local A : a
local B : b
init A
arc ab A B guard true do L1
arc ba B A guard true do L1
"""

# process 1 toggles x; process 2 moves C -> D only while x=0, back only while x=1
SHARED = """
shared x domain 0,1 init 0
process 1
local A : a
local A2 : a
init A
arc w A A2 guard true do x:=1
arc back A2 A guard true do x:=0
process 2
local C : c
local D : c
init C
arc g C D guard x=0 do skip
arc h D C guard x=1 do skip
"""


def arw(body, shared="shared x domain 0,1 init 0\n"):
    text = shared + """process 1
local A : a
local B : b
init A
""" + body + """
process 2
local C : c
local D : d
init C
arc cd C D guard true do L2
arc dc D C guard true do L2
"""
    return validate_arw(parse_program(text))


def test_validate_arw_examples():
    assert arw("arc x1 A A guard true do x:=1") == []
    assert "guarded and writing" in arw("arc x1 A A guard c do x:=1")[0]
    assert "not a simple term" in arw("arc x1 A A guard c & x=0 do skip")[0]
    assert arw("arc x1 A A guard c do skip") == []
    assert arw("arc x1 A A guard x=1 do skip") == []


def test_validate_arw_other_violations():
    assert "unguarded but nonwriting" in arw("arc x1 A A guard true do skip")[0]
    assert "changes the label" in arw("arc x1 A B guard true do x:=1")[0]
    assert "label does not change" in arw("arc x1 A A guard true do L1")[0]
    assert "counter of process 2" in arw("arc x1 A B guard true do L2")[0]
    assert "own process" in arw("arc x1 A A guard a do skip")[0]
    assert "unknown proposition" in arw("arc x1 A A guard zz do skip")[0]
    assert "unknown shared variable" in arw("arc x1 A A guard y=0 do skip")[0]
    assert "not in the domain" in arw("arc x1 A A guard true do x:=7")[0]
    assert "guarded arc changes the label" in arw("arc x1 A B guard c do skip")[0]


@pytest.mark.parametrize("text", [
    "",
    "local A : a\n",
    "process 1\nlocal A : a\n",
    "process 1\nlocal A : a\ninit A\nprocess 1\nlocal B : b\ninit B\n",
    "process 1\nlocal A : a\ninit Z\n",
    "process 1\nlocal A : a\ninit A\narc x A Z guard true do L1\n",
    "process 1\nlocal A : a\ninit A\narc x A A guard true do L1\narc x A A guard true do L1\n",
    "process 1\nlocal A : a\ninit A\nprocess 2\nlocal B : a\ninit B\n",
    "shared x domain 0 init 1\nprocess 1\nlocal A : a\ninit A\n",
    "process 1\nlocal A : a\ninit A\narc x A A guard true do frob\n",
    "process 1\nlocal A : a\ninit A\nbogus\n",
])
def test_parse_errors(text):
    with pytest.raises(SkeletonError):
        parse_program(text)


def test_round_trip():
    for path in ("barrier_plain.prog", "barrier_speculative.prog"):
        prog = load_program(FIXTURES / path)
        text = format_program(prog)
        assert parse_program(text) == prog
        assert format_program(parse_program(text)) == text


def test_removed_arcs_are_commented():
    prog = parse_program(TWO)
    arc = prog.process("1").arcs[0]
    text = format_program(prog.without_arcs({"ab"}), [("1", arc)])
    assert "# removed: arc ab A B guard true do L1" in text
    assert parse_program(text) == prog.without_arcs({"ab"})


def test_two_state_stg():
    stg = build_global_stg(parse_program(TWO))
    m = stg.structure
    assert m.states == {"A", "B"} and m.initial == "A"
    assert m.transitions == {("A", "B"), ("B", "A")}
    assert stg.families == {"ab": frozenset({("A", "B")}), "ba": frozenset({("B", "A")})}
    assert m.labels["B"] == {"b"}


def test_shared_variable_guard_disabled_after_write():
    stg = build_global_stg(parse_program(SHARED))
    m = stg.structure
    # hand simulation: 4 reachable tuples, 6 transitions
    assert m.states == {"A.C.x=0", "A2.C.x=1", "A.D.x=0", "A2.D.x=1"}
    assert stg.families == {
        "w": frozenset({("A.C.x=0", "A2.C.x=1"), ("A.D.x=0", "A2.D.x=1")}),
        "back": frozenset({("A2.C.x=1", "A.C.x=0"), ("A2.D.x=1", "A.D.x=0")}),
        "g": frozenset({("A.C.x=0", "A.D.x=0")}),
        "h": frozenset({("A2.D.x=1", "A2.C.x=1")}),
    }
    # after x:=1 the guard x=0 is off: no C -> D move from A2.C.x=1
    assert m.successors("A2.C.x=1") == ["A.C.x=0"]
    assert m.labels["A2.D.x=1"] == {"a", "c", "x=1"}
    assert m.ap == {"a", "c", "x=0", "x=1"}
    assert stg.tuples["A.D.x=0"] == ("A", "D", "0")


def test_families_partition_transitions():
    stg = build_global_stg(load_program(FIXTURES / "barrier_speculative.prog"))
    fams = list(stg.families.values())
    assert sum(len(f) for f in fams) == len(stg.structure.transitions)
    assert frozenset().union(*fams) == stg.structure.transitions
    assert all(stg.arc_of[e] == a for a, f in stg.families.items() for e in f)


def test_plain_barrier_stg_is_full_product():
    stg = build_global_stg(load_program(FIXTURES / "barrier_plain.prog"))
    assert len(stg.structure.states) == 16
    assert len(stg.structure.transitions) == 32


def test_state_bound_and_game():
    with pytest.raises(SkeletonError):
        build_global_stg(load_program(FIXTURES / "barrier_plain.prog"), bound=10)
    stg = build_global_stg(parse_program(TWO), player="1")
    assert stg.game.players == {"1"} and set(stg.game.turn.values()) == {"1"}


def test_invalid_program_rejected():
    prog = parse_program(TWO.replace("do L1\narc ba", "do skip\narc ba"))
    with pytest.raises(SkeletonError):
        build_global_stg(prog)


def test_unchanged_program():
    prog = parse_program(TWO)
    r = repair_program(prog, "AG (a | b)")
    assert r.status == "unchanged" and r.program is prog


def test_repair_removes_whole_arcs():
    # only the guarded move g leaves x at 0 in one step
    eta = "AG (x=0 -> AX x=1)"
    r = repair_program(parse_program(SHARED), eta)
    assert r.status == "repaired"
    assert [(n, a.id) for n, a in r.removed_arcs] == [("2", "g")]
    assert r.stg.structure.states == {"A.C.x=0", "A2.C.x=1"}
    assert check_ctl(r.stg.structure, parse(eta))[0]
    assert r.deleted_states == {"A.D.x=0", "A2.D.x=1"}


def test_repair_program_failure():
    r = repair_program(parse_program(TWO), "AG a")
    assert r.status == "failure" and r.program is None and r.text() == ""


def arc_subset_repairable(prog, eta):
    """Oracle: some set of arcs, once removed, yields a deadlock-free STG satisfying eta."""
    ids = [a.id for _, a in prog.arcs()]
    for k in range(len(ids) + 1):
        for drop in itertools.combinations(ids, k):
            g = Graph.of(build_global_stg(prog.without_arcs(set(drop))).structure)
            if g.total() and holds_ctl(g, eta):
                return True
    return False


def test_plain_barrier_is_not_repairable():
    prog = load_program(FIXTURES / "barrier_plain.prog")
    eta = parse((FIXTURES / "barrier.ctl").read_text())
    assert not arc_subset_repairable(prog, eta)
    assert repair_program(prog, eta).status == "failure"


def test_speculative_barrier_repair(barrier):
    prog, eta, res, _ = barrier
    assert res.status == "repaired"
    m = res.stg.structure
    assert is_total(m) and holds_ctl(Graph.of(m), eta)
    kept = {a.id for _, a in res.program.arcs()}
    # every unguarded move survives; only speculative waits are pruned
    assert {f"{x}{i}_go" for x in ("sa", "ea", "sb", "eb") for i in (1, 2)} <= kept
    assert {a.id for _, a in res.removed_arcs} == {a.id for _, a in prog.arcs()} - kept
    assert res.text().count("# removed: arc") == len(res.removed_arcs)


def test_seed_alone_keeps_unchanged():
    prog = parse_program(TWO)
    r = repair_program(prog, "AG (a | b)", RepairOptions(seed=3))
    assert r.status == "unchanged"
