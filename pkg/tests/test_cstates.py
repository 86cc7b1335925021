from syminfer import lang
from syminfer.cstates import BlockSet, fuzz_states, gen_states
from syminfer.symexec import exec_to_depth


def reproduced(p, sample):
    for values, ins in sample.states.items():
        seen = [s.values for s in lang.interpret(p, ins, sample.loc).states]
        if values not in seen:
            return False
    return True


def test_one_state_per_symbolic_state(idiv, solver):
    sample = gen_states(idiv, "L", 1, 5, solver)
    assert len(sample) >= 9
    assert reproduced(idiv, sample)


def test_enough_distinct_states_for_degree_two(idiv, solver):
    sample = gen_states(idiv, "L", 21, 5, solver)
    assert len(set(sample.states)) >= 21 and not sample.exhausted
    assert reproduced(idiv, sample)
    # no input point is used twice
    assert len(set(sample.states.values())) == len(sample.states)


def test_singleton_input_space(solver):
    p = lang.parse("fn f(a: int) { assume(a == 7); @L; }")
    sample = gen_states(p, "L", 5, 0, solver)
    assert list(sample.states) == [(7,)] and sample.exhausted


def test_unreachable_location(solver):
    p = lang.parse("fn f(a: int) { assume(a > 0); if (a < 0) { @L; } }")
    sample = gen_states(p, "L", 3, 4, solver)
    assert len(sample) == 0 and sample.diagnostic


def test_seed_determinism(idiv, solver):
    a = gen_states(idiv, "L", 30, 5, solver, seed=3)
    b = gen_states(idiv, "L", 30, 5, solver, seed=3)
    assert list(a.states.items()) == list(b.states.items())


def test_reuses_given_symbolic_states(idiv, solver):
    sym = exec_to_depth(idiv, "L", 6, solver.feasibility)
    sample = gen_states(idiv, "L", 1, 5, solver, symstates=sym)
    assert len(sample) >= 9


def test_fuzz_finds_x2_equal_one(idiv):
    # each valid input yields ~x1 states, so a large n is needed to see x2 = 1
    sample = fuzz_states(idiv, "L", 200_000, -300, 300, seed=0)
    assert any(v[1] == 1 for v in sample.states)


def test_fuzz_empty_range_point(idiv):
    sample = fuzz_states(idiv, "L", 10, 0, 0, seed=0)
    assert len(sample) == 0


def test_fuzz_determinism(idiv):
    assert fuzz_states(idiv, "L", 50, seed=5).states == fuzz_states(idiv, "L", 50, seed=5).states


def test_block_set_dedupes():
    b = BlockSet(["X1"])
    assert b.add((1,)) and not b.add((1,)) and len(b) == 1


def test_csv_dump(idiv, solver, tmp_path):
    sample = gen_states(idiv, "L", 1, 3, solver)
    sample.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,y1,y2,y3" and len(lines) == len(sample) + 1
