import pytest

from syminfer import infer, lang
from syminfer.cegir import Candidate, Engine, remove_redundant
from syminfer.infer import Inequality, OctTerm, create_terms
from syminfer.logic import TRUE


@pytest.fixture(scope="module")
def engine(idiv, solver):
    return Engine(idiv, solver)


def test_spurious_product_refuted_at_depth_five(engine):
    o = engine.verify("L", lang.relation("y1 * y2 * y3 == 0"), k0=5)
    assert o.status == "refuted" and o.settled_depth == 5


def test_true_invariant_settles(engine):
    o = engine.verify("L", lang.relation("x2*y1 - x1 + y2 + y3 == 0"), k0=5)
    assert o.status == "invariant" and o.settled_depth == 5


def test_degree_two_artifact_refuted(engine):
    o = engine.verify("L", lang.relation("x1*y3 - 12*y1*y3 - y2*y3 - y3*y3 == 0"), k0=5)
    assert o.status == "refuted"


def test_tautology(engine):
    o = engine.verify("L", TRUE, k0=5)
    assert o.status == "invariant" and o.settled_depth == 5


def test_cex_is_real(engine, idiv):
    cand = lang.relation("y2 <= 0")
    o = engine.verify("L", cand, k0=5)
    assert o.status == "refuted"
    (cex,), (ins,) = o.cex, o.cex_inputs
    from syminfer.logic import evaluate

    assert not evaluate(cand, cex.as_dict(idiv.vars_at("L")))
    assert cex.values in [s.values for s in lang.interpret(idiv, ins, "L").states]


def test_unreachable_is_unknown(solver):
    p = lang.parse("fn f(a: int) { assume(a > 0); if (a < 0) { @L; } }")
    o = Engine(p, solver, start_depth=2, max_depth=4).verify("L", TRUE)
    assert o.status == "unknown" and "not reached" in o.diagnostic


def test_idiv_equalities(engine):
    res = engine.cegir_eqts("L", 2)
    assert [str(c) for c in res.invariants] == ["x2*y1 - x1 + y2 + y3 == 0"]
    assert all(c.is_inv and c.depth >= 10 for c in res.invariants)


def test_straight_line(solver):
    p = lang.parse("fn f(a: int, b: int) { int s = a + b; @L; }")
    res = Engine(p, solver).cegir_eqts("L", 1)
    assert [str(c) for c in res.invariants] == ["a + b - s == 0"]


def test_idiv_spurious_bound_avoided(engine):
    term = OctTerm((("x2", -1),))
    got = engine.cegir_oct("L", term, -10, 10)
    assert got.prop.bound == -1  # x2 >= 1, not x2 >= 2


def test_idiv_x1_nonnegative(engine):
    got = engine.cegir_oct("L", OctTerm((("x1", -1),)), -10, 10)
    assert str(got) == "x1 >= 0"


def test_unbounded_term_has_no_bound(engine):
    assert engine.cegir_oct("L", OctTerm((("x1", 1),)), -10, 10) is None


def test_pinned_variable(solver):
    p = lang.parse("fn f(a: int) { assume(a == 3); int x = a; @L; }")
    eng = Engine(p, solver, start_depth=1, max_depth=3)
    assert eng.cegir_oct("L", OctTerm((("x", 1),))).prop.bound == 3
    assert eng.cegir_oct("L", OctTerm((("x", -1),))).prop.bound == -3


def test_binary_search_matches_linear_scan(solver):
    p = lang.parse("fn f(a: int) { assume(a >= 0 && a <= 7); int i = 0; while (i < a) { i = i + 1; } @L; }")
    eng = Engine(p, solver, start_depth=3, max_depth=12)
    for term in infer.oct_terms(p.vars_at("L")):
        scan = next((k for k in range(-12, 13) if eng.verify("L", Inequality(term, k).formula()).status == "invariant"), None)
        calls = [0]
        got = eng.cegir_oct("L", term, -12, 12, counter=calls)
        assert (got.prop.bound if got else None) == scan
        # the ceil midpoint keeps mid on the proved side, so the worst case is one over log2
        assert calls[0] <= 6  # ceil(log2(25)) + 1


def test_true_value_seven_within_log_calls(solver):
    p = lang.parse("fn f(a: int) { assume(a >= 0 && a <= 7); @L; }")
    eng = Engine(p, solver, start_depth=1, max_depth=3)
    calls = [0]
    assert eng.cegir_oct("L", OctTerm((("a", 1),)), -10, 10, counter=calls).prop.bound == 7
    assert calls[0] <= 5




def test_remove_redundant_subsumption(solver):
    x = OctTerm((("x", 1),))
    cands = [Candidate(Inequality(x, 5), True), Candidate(Inequality(x, 3), True)]
    assert [str(c) for c in remove_redundant(solver, cands)] == ["x <= 3"]


def test_remove_redundant_equality_wins(solver):
    ts = create_terms(["x", "y"], 1)
    eq = Candidate(infer.EqInvariant(ts, (0, 1, -1)), True)
    le = Candidate(Inequality(OctTerm((("x", 1), ("y", -1))), 0), True)
    assert [str(c) for c in remove_redundant(solver, [le, eq])] == ["x - y == 0"]
