import csv
import shutil
import subprocess
import sys

import pytest

from ctlrepair.cli import main
from ctlrepair.cnf import parse_dimacs
from ctlrepair.kripke import parse_structure
from ctlrepair.skeleton import parse_program
from ctlrepair.solver import solve_external

from conftest import FIXTURES, TOOLS

SEC51 = str(FIXTURES / "sec51.kripke")
PYSAT = f"{sys.executable} {TOOLS / 'pysat_solve.py'}"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_check(capsys):
    assert run(capsys, "check", SEC51, "(AG p | AG q) & EX p")[:2] == (1, "false\n")
    assert run(capsys, "check", SEC51, "true")[:2] == (0, "true\n")
    code, _, err = run(capsys, "check", "/nonexistent.kripke", "true")
    assert code == 2 and "error" in err


def test_check_labels(capsys):
    code, out, _ = run(capsys, "check", SEC51, "EX p", "--labels")
    assert code == 0 and out.startswith("true\n") and "EX p" in out


def test_formula_source_rules(capsys, tmp_path):
    f = tmp_path / "f.ctl"
    f.write_text("EX q\n")
    assert run(capsys, "check", SEC51, "-F", f)[0] == 0
    assert run(capsys, "check", SEC51)[0] == 2
    assert run(capsys, "check", SEC51, "true", "-F", f)[0] == 2
    assert run(capsys, "check", SEC51, "AG (")[0] == 2


def test_repair_sec51(capsys):
    code, out, _ = run(capsys, "repair", SEC51, "(AG p | AG q) & EX p")
    assert code == 0
    assert "# status: repaired" in out and "# deleted edge s t" in out and "# deleted state t" in out
    m = parse_structure(out)
    assert m.transitions == {("s", "u"), ("u", "s")}


def test_repair_failure_and_unchanged(capsys):
    code, out, _ = run(capsys, "repair", SEC51, "AX p & AX ~p")
    assert code == 3 and "failure" in out
    code, out, _ = run(capsys, "repair", SEC51, "EX q")
    assert code == 0
    assert out == "# status: unchanged\n" + (FIXTURES / "sec51.kripke").read_text()


def test_uncontrollable(capsys, tmp_path):
    u = tmp_path / "u.txt"
    u.write_text("# keep s -> t\nedge s t\n")
    assert run(capsys, "repair", SEC51, "(AG p | AG q) & EX p", "--uncontrollable", u)[0] == 3
    u.write_text("s zz\n")
    assert run(capsys, "repair", SEC51, "EX p", "--uncontrollable", u)[0] == 2


def test_constraint_symmetry_families_and_state_deletion(capsys, tmp_path):
    assert run(capsys, "repair", SEC51, "EX p", "--constraint", "~E(s,u)")[0] == 3
    assert run(capsys, "repair", SEC51, "EX p | EX q", "--constraint", "~E(s,u)",
               "--constraint", "~E(s,t)")[0] == 3
    sym = tmp_path / "sym.txt"
    sym.write_text("edge s t s u\n")
    assert run(capsys, "repair", SEC51, "(AG p | AG q) & EX p", "--symmetry", sym)[0] == 3
    fam = tmp_path / "fam.txt"
    fam.write_text("f1 s t\nf1 u s\nf2 s u\nf2 t s\n")
    assert run(capsys, "repair", SEC51, "(AG p | AG q) & EX p", "--families", fam)[0] == 3
    code, out, _ = run(capsys, "repair", SEC51, "(AG p | AG q) & EX p", "--allow-state-deletion")
    assert code == 0 and "# deleted state t" in out
    bad = tmp_path / "bad.txt"
    bad.write_text("state s\n")
    assert run(capsys, "repair", SEC51, "EX p", "--symmetry", bad)[0] == 2


def test_repair_out_and_emit_dimacs(capsys, tmp_path):
    out_file, cnf_file = tmp_path / "m.kripke", tmp_path / "r.cnf"
    code, out, _ = run(capsys, "repair", SEC51, "(AG p | AG q) & EX p", "-o", out_file,
                       "--emit-dimacs", cnf_file)
    assert code == 0 and "# status: repaired" in out
    assert parse_structure(out_file.read_text()).states == {"s", "u"}
    text = cnf_file.read_text()
    assert "c var 1 E(s,t)" in text
    assert solve_external(parse_dimacs(text), PYSAT).sat


@pytest.mark.parametrize("eta,code", [("(AG p | AG q) & EX p", 0), ("AX p & AX ~p", 3)])
def test_emit_dimacs_agrees_with_external(capsys, tmp_path, eta, code):
    cnf_file = tmp_path / "r.cnf"
    assert run(capsys, "repair", SEC51, eta, "--emit-dimacs", cnf_file)[0] == code
    assert solve_external(parse_dimacs(cnf_file.read_text()), PYSAT).sat == (code == 0)


def test_external_solver_flag(capsys):
    code, out, _ = run(capsys, "repair", SEC51, "(AG p | AG q) & EX p", "--solver", PYSAT)
    assert code == 0 and "# deleted edge s t" in out
    code, _, err = run(capsys, "repair", SEC51, "(AG p | AG q) & EX p",
                       "--solver", f"{sys.executable} {TOOLS / 'broken_solver.py'}")
    assert code == 2 and "violates" in err


def test_solver_env_default(capsys, monkeypatch):
    monkeypatch.setenv("CTLREPAIR_SOLVER", "/nonexistent/solver")
    assert run(capsys, "repair", SEC51, "(AG p | AG q) & EX p")[0] == 2
    assert run(capsys, "repair", SEC51, "(AG p | AG q) & EX p", "--solver", "embedded")[0] == 0


def test_resource_limit_exit(capsys, tmp_path):
    m, f = tmp_path / "m.kripke", tmp_path / "f.ctl"
    assert run(capsys, "gen-3sat", "--vars", 6, "--clauses", 40, "--seed", 1,
               "--formula-out", f, "-o", m)[0] == 0
    code, _, err = run(capsys, "repair", m, "-F", f, "--max-conflicts", 0)
    assert code == 4 and "budget" in err


def test_negative_budget_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["repair", SEC51, "EX p", "--max-conflicts", "-1"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_repair_atl(capsys, tmp_path):
    g = tmp_path / "g.kripke"
    assert run(capsys, "gen-random", "-n", 4, "--p", 0.5, "--players", "1,2", "--seed", 3, "-o", g)[0] == 0
    code, out, _ = run(capsys, "repair-atl", g, "<<1>>G (p | q) | <<>>X true")
    assert code == 0
    assert run(capsys, "repair-atl", SEC51, "<<1>>X p")[0] == 2
    assert run(capsys, "repair", g, "EX p")[0] == 2


def test_skeleton_repair(capsys, tmp_path):
    prog = tmp_path / "two.prog"
    prog.write_text("process 1\nlocal A : a\nlocal B : b\ninit A\n"
                    "arc ab A B guard true do L1\narc ba B A guard true do L1\n")
    code, out, _ = run(capsys, "skeleton-repair", prog, "AG (a | b)")
    assert code == 0 and out == "# status: unchanged\n" + prog.read_text()
    assert run(capsys, "skeleton-repair", prog, "AG a")[0] == 3
    fam = tmp_path / "fam.txt"
    fam.write_text("f A B\n")
    assert run(capsys, "skeleton-repair", prog, "AG a", "--families", fam)[0] == 2


def test_skeleton_repair_barrier(capsys, tmp_path):
    out_file = tmp_path / "fixed.prog"
    code, out, _ = run(capsys, "skeleton-repair", FIXTURES / "barrier_speculative.prog",
                       "-F", FIXTURES / "barrier.ctl", "-o", out_file)
    assert code == 0 and "# status: repaired" in out and "# removed arc" in out
    fixed = parse_program(out_file.read_text())
    assert run(capsys, "skeleton-repair", out_file, "-F", FIXTURES / "barrier.ctl")[1].startswith(
        "# status: unchanged")
    assert len(list(fixed.arcs())) < 40


def test_encode_and_solve(capsys, tmp_path):
    code, out, _ = run(capsys, "encode", SEC51, "EX p")
    assert code == 0 and out.startswith("c formula EX p\nc var 1 E(s,t)\n")
    cnf = tmp_path / "x.cnf"
    cnf.write_text(out)
    code, out, _ = run(capsys, "solve", cnf)
    assert code == 0 and out.startswith("s SATISFIABLE\nv ")
    cnf.write_text("p cnf 1 2\n1 0\n-1 0\n")
    assert run(capsys, "solve", cnf)[:2] == (0, "s UNSATISFIABLE\n")
    cnf.write_text("p cnf 1 2\n1 0\n")
    assert run(capsys, "solve", cnf)[0] == 2


def test_gen_random(capsys):
    code, out, _ = run(capsys, "gen-random", "-n", 5, "--p", 0.3, "--seed", 7)
    assert code == 0 and out.startswith("# random structure: nodes=5 p=0.3 seed=7\n")
    assert len(parse_structure(out).states) == 5
    assert run(capsys, "gen-random", "-n", 5, "--p", 0.3, "--seed", 7)[1] == out


def test_gen_3sat_from_file(capsys, tmp_path):
    cnf = tmp_path / "x.cnf"
    cnf.write_text("p cnf 2 2\n1 -2 0\n2 0\n")
    code, out, _ = run(capsys, "gen-3sat", "--cnf", cnf)
    assert code == 0 and "# formula: " in out
    assert parse_structure(out).states == {"s0", "s1", "s2", "t1", "t2"}
    assert run(capsys, "gen-3sat", "--vars", 3)[0] == 2
    cnf.write_text("p cnf 2 1\n1 2 -1 2 0\n")
    assert run(capsys, "gen-3sat", "--cnf", cnf)[0] == 2


def test_bench(capsys):
    code, out, _ = run(capsys, "bench", "--nodes", "1,8", "--seed", 2)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# seed=2 p=0.1 trials=1"
    rows = list(csv.DictReader(lines[1:]))
    assert [r["nodes"] for r in rows] == ["1", "8"]
    assert int(rows[0]["propositions"]) < int(rows[1]["propositions"])
    assert all(int(r["repaired"]) + int(r["failed"]) == 1 for r in rows)
    assert run(capsys, "bench", "--nodes", "x")[0] == 2
    assert run(capsys, "bench", "--nodes", "4", "--p", "0")[0] == 2


def test_console_script():
    exe = shutil.which("ctlrepair")
    if exe is None:
        pytest.skip("console script not installed")
    r = subprocess.run([exe, "check", SEC51, "EX p"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout == "true\n"
