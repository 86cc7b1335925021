import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syminfer import lang, smt
from syminfer.logic import FALSE, Poly, atom, conj, evaluate, to_smt
from syminfer.smt import Solver, encode_state, encode_states, formula_from_smt, parse_sexps, script
from syminfer.symexec import exec_to_depth

x = Poly.var("x")


def rel(text):
    return lang.relation(text)


def test_contradiction_is_unsat(solver):
    assert solver.check_sat(conj([rel("x == 1"), rel("x == 2")])).status == "unsat"


def test_forced_model(solver):
    v = solver.check_sat(conj([rel("x * x == 4"), rel("x > 0")]))
    assert v.sat and v.model == {"x": 2}


def test_model_is_total_over_requested_symbols(solver):
    v = solver.check_sat(rel("x > 3"), ["x", "unused"])
    assert v.sat and set(v.model) == {"x", "unused"}


def test_false_implies_anything(solver):
    assert solver.check_implication(FALSE, rel("x == 7")).unsat


def test_timeout_gives_unknown():
    # a hard nonlinear instance with a 1 ms budget
    s = Solver(timeout_ms=1)
    f = conj([rel("a*a*a + b*b*b == c*c*c + 3"), rel("a > 100"), rel("b > 100"), rel("c > 100")])
    v = s.check_sat(f)
    assert v.status == "unknown" and v.reason == "timeout"


def test_missing_solver_is_unknown():
    s = Solver(cmd="definitely-not-a-solver-binary")
    v = s.check_sat(rel("x == 1"))
    assert v.status == "unknown" and v.reason == "incomplete"


def test_malformed_reply_is_an_error(tmp_path):
    fake = tmp_path / "fake.sh"
    fake.write_text("#!/bin/sh\ncat > /dev/null\necho 'banana'\n")
    fake.chmod(0o755)
    with pytest.raises(smt.SolverError):
        Solver(cmd=str(fake)).check_sat(rel("x == 1"))


def test_script_is_deterministic_and_declares_symbols():
    f = conj([rel("y == x + 1"), rel("x != 0")])
    a, b = script(f, ["x", "y"]), script(f, ["x", "y"])
    assert a == b
    assert "(declare-fun x () Int)" in a and "(declare-fun y () Int)" in a
    assert "(not (= " in a
    assert "(set-logic QF_NIA)" in a
    assert "set-logic" not in script(f, ["x", "y"], logic=None)


@pytest.mark.parametrize("session", [False, True])
def test_undeclared_logic_gives_same_verdicts(session):
    s = Solver(logic=None, session=session)
    try:
        assert s.check_sat(rel("x * x == 2")).status == "unsat"
        v = s.check_sat(rel("x * y == 6 && x > y && y > 1"))
        assert v.sat and (v.model["x"], v.model["y"]) == (3, 2)
    finally:
        s.close()


def test_parse_sexps():
    assert parse_sexps("sat\n((x 3) (y (- 4)))") == ["sat", [["x", "3"], ["y", ["-", "4"]]]]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4), st.integers(-9, 9),
                          st.sampled_from(["==", "!=", "<", "<=", ">", ">="])), min_size=1, max_size=3))
def test_formula_smt_round_trip(parts):
    f = conj(atom(Poly.var("x") * a + Poly.var("y") * Poly.var("x") * b, op, c) for a, b, c, op in parts)
    assert formula_from_smt(to_smt(f)) == f


def test_encode_state_v2(idiv, solver):
    s = exec_to_depth(idiv, "L", 5, solver.feasibility)
    names = idiv.vars_at("L")
    v2 = next(st_ for st_ in s.states if [str(e) for e in st_.env[2:]] == ["1", "0", "X1 - 1"])
    f = encode_state(v2, names)
    # the encoding pins the variables to the symbolic values under the pc
    assert evaluate(f, {"X1": 5, "X2": 1, "x1": 5, "x2": 1, "y1": 1, "y2": 0, "y3": 4})
    assert not evaluate(f, {"X1": 5, "X2": 1, "x1": 5, "x2": 1, "y1": 1, "y2": 0, "y3": 3})
    assert not evaluate(f, {"X1": 5, "X2": 2, "x1": 5, "x2": 2, "y1": 1, "y2": 0, "y3": 4})


def test_encode_state_trivial(solver):
    p = lang.parse("fn f(x: int) { @L; }")
    (st_,) = exec_to_depth(p, "L", 0, solver.feasibility).states
    assert encode_state(st_, ("x",)) == rel("x == X1")


def test_encode_state_skips_bottom(solver):
    p = lang.parse("fn f(x: int) { int y; @L; }")
    (st_,) = exec_to_depth(p, "L", 0, solver.feasibility).states
    assert "y" not in to_smt(encode_state(st_, ("x", "y")))


def test_idiv_implications(idiv, solver):
    names = idiv.vars_at("L")
    vc = encode_states(exec_to_depth(idiv, "L", 5, solver.feasibility).states, names)
    assert solver.check_implication(vc, rel("y1 * y2 * y3 == 0")).sat
    assert solver.check_implication(vc, rel("x2 * y1 - x1 + y2 + y3 == 0")).unsat


@settings(max_examples=40, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(-30, 30))
def test_models_satisfy_formula(solver, a, b, c):
    f = conj([atom(x * x * a + Poly.var("y") * b, "<=", c), rel("y >= -5"), rel("y <= 5"), rel("x >= -5"), rel("x <= 5")])
    v = solver.check_sat(f)
    if v.sat:
        assert evaluate(f, v.model)
    else:
        # exhaustive oracle over the box
        assert v.unsat and not any(evaluate(f, {"x": i, "y": j}) for i in range(-5, 6) for j in range(-5, 6))


def test_session_mode_agrees(idiv):
    plain, pooled = Solver(), Solver(session=True)
    try:
        fs = [rel("x * x == 9"), conj([rel("x > 2"), rel("x < 3")]), rel("x * y == 12")]
        for f in fs:
            assert plain.check_sat(f).status == pooled.check_sat(f).status
    finally:
        pooled.close()


def test_transcripts_are_logged(tmp_path):
    s = Solver(log_dir=tmp_path)
    v = s.check_sat(rel("x == 1"))
    (f,) = tmp_path.iterdir()
    assert v.transcript in f.name and "verdict: sat" in f.read_text()


def _second_solver():
    pytest.importorskip("cvc5")
    return Solver(cmd=f"{sys.executable} {Path(__file__).parent / 'cvc5_stdin.py'}")


def test_second_solver_agrees_on_emitted_scripts(idiv, solver):
    other = _second_solver()
    names = idiv.vars_at("L")
    states = exec_to_depth(idiv, "L", 5, solver.feasibility).states
    queries = [encode_state(s_, names) for s_ in states]
    vc = encode_states(states, names)
    queries.append(conj([vc, rel("y1 * y2 * y3 != 0")]))
    queries.append(conj([vc, rel("x2 * y1 - x1 + y2 + y3 != 0")]))
    queries += [rel("x * x == 4"), conj([rel("x == 1"), rel("x == 2")])]
    for f in queries:
        a, b = solver.check_sat(f), other.check_sat(f)
        assert a.status == b.status
        if b.sat:
            assert evaluate(f, b.model)
