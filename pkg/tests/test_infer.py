import math
import random

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from syminfer import infer
from syminfer.infer import EqInvariant, create_terms, infer_eqts, nullspace, oct_bounds_from_states, oct_terms


def test_ten_terms_for_three_variables():
    ts = create_terms(["x", "y", "z"], 2)
    assert [ts.label(i) for i in range(len(ts))] == ["1", "x", "y", "z", "x^2", "x*y", "x*z", "y^2", "y*z", "z^2"]


def test_linear_single_variable():
    ts = create_terms(["x"], 1)
    assert [ts.label(i) for i in range(len(ts))] == ["1", "x"]


def test_seventy_terms_at_degree_four():
    assert len(create_terms(["P", "M", "N", "t"], 4)) == math.comb(8, 4) == 70


def test_term_cap():
    with pytest.raises(infer.TooManyTerms):
        create_terms([f"v{i}" for i in range(12)], 4)


def test_planted_relation():
    ts = create_terms(["x", "y"], 1)
    eqs = infer_eqts(ts, [(i, i) for i in range(5)])
    assert [str(e) for e in eqs] == ["x - y == 0"]


def test_idiv_invariant_from_traces(idiv):
    from syminfer import lang

    states = []
    for a, b in [(15, 2), (4, 1), (7, 3), (9, 4), (11, 5), (20, 3)]:
        states += [s.values for s in lang.interpret(idiv, (a, b), "L").states]
    eqs = infer_eqts(create_terms(idiv.vars_at("L"), 2), states)
    assert [str(e) for e in eqs] == ["x2*y1 - x1 + y2 + y3 == 0"]


def test_duplicate_rows_collapse():
    ts = create_terms(["x", "y"], 2)
    rows = [(1, 2), (1, 2), (3, 5)]
    assert len(infer.state_rows(ts, rows)) == 2


def test_canonical_form():
    ts = create_terms(["x", "y"], 1)
    e = EqInvariant(ts, (0, -4, 6))
    assert e.coeffs == (0, 2, -3)
    with pytest.raises(ValueError):
        EqInvariant(ts, (0, 0, 0))


def test_rank_nullity_on_few_states():
    rng = random.Random(1)
    ts = create_terms(["a", "b", "c"], 2)
    states = [tuple(rng.randint(-9, 9) for _ in range(3)) for _ in range(4)]
    assert len(infer_eqts(ts, states)) >= len(ts) - len(states)


def sympy_nullity(rows, n):
    return n - sympy.Matrix(rows).rank()


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 12), st.integers(0, 10**6))
def test_nullspace_matches_sympy(nvars, d, nstates, seed):
    rng = random.Random(seed)
    names = [f"v{i}" for i in range(nvars)]
    ts = create_terms(names, d)
    states = [tuple(rng.randint(-4, 4) for _ in names) for _ in range(nstates)]
    rows = infer.state_rows(ts, states)
    basis = nullspace(rows, len(ts))
    # soundness: exact zero on every row
    assert all(sum(c * t for c, t in zip(v, r)) == 0 for v in basis for r in rows)
    # completeness: dimension equals the rational nullity
    assert len(basis) == sympy_nullity(rows, len(ts))
    assert infer.rank(basis, len(ts)) == len(basis)
    # canonical and reproducible
    assert basis == nullspace(rows, len(ts))
    for v in basis:
        assert math.gcd(*v) == 1 and next(x for x in v if x) > 0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(-6, 6), min_size=4, max_size=4), min_size=1, max_size=6))
def test_rref_rank_matches_sympy(rows):
    assert infer.rank(rows, 4) == sympy.Matrix(rows).rank()


def test_reduce_basis_spans_same_space():
    ts = create_terms(["x", "y"], 1)
    eqs = [EqInvariant(ts, (1, 1, 0)), EqInvariant(ts, (1, 0, 1))]
    red = infer.reduce_basis(eqs)
    assert all(infer.in_span(e, red) for e in eqs) and len(red) == 2


def test_oct_term_count():
    for n in range(1, 6):
        names = [f"v{i}" for i in range(n)]
        assert len(oct_terms(names)) == 2 * n + 4 * math.comb(n, 2)


def test_oct_bounds_two_points():
    got = [str(i) for i in oct_bounds_from_states([(1, 2), (3, 1)], ["x", "y"])]
    assert got == ["x <= 3", "x >= 1", "y <= 2", "y >= 1", "x - y <= 2", "x - y >= -1", "x + y <= 4", "x + y >= 3"]


def test_oct_bounds_single_state():
    assert [str(i) for i in oct_bounds_from_states([(5,)], ["x"])] == ["x <= 5", "x >= 5"]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50)), min_size=1, max_size=10))
def test_oct_bounds_tight_and_sound(states):
    names = ["a", "b", "c"]
    for ineq in oct_bounds_from_states(states, names):
        values = [ineq.term.value(dict(zip(names, s))) for s in states]
        assert max(values) == ineq.bound
