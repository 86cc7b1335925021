"""Concrete L-states for bootstrapping inference.

``gen_states`` turns symbolic states into concrete ones by asking the solver
for models of their path conditions, blocking every input point once used so
that later models are new.  ``fuzz_states`` is the random-testing alternative.
"""

from __future__ import annotations

import csv
import logging
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import lang
from .lang import ConcreteState, Program
from .logic import Formula, conj, disj, neg
from .smt import Solver, point
from .symexec import SymStateSet, exec_to_depth

log = logging.getLogger(__name__)


class BlockSet:
    """Distinct points, kept as ``name == value`` conjunctions."""

    def __init__(self, names: Sequence[str]):
        self.names = tuple(names)
        self._points: dict[tuple, Formula] = {}

    def add(self, values: Sequence[int]) -> bool:
        key = tuple(values)
        if key in self._points:
            return False
        self._points[key] = point(dict(zip(self.names, key)))
        return True

    def __contains__(self, values) -> bool:
        return tuple(values) in self._points

    def __len__(self):
        return len(self._points)

    def __iter__(self):
        return iter(self._points)

    def exclusion(self) -> Formula:
        """Formula satisfied exactly by points outside the set."""
        return neg(disj(self._points.values()))


@dataclass
class StateSample:
    """States at one location with, for each, the input vector that produced it."""

    loc: str
    names: tuple
    states: dict = field(default_factory=dict)  # value tuple -> inputs tuple (first seen)
    exhausted: bool = False
    diagnostic: Optional[str] = None

    def add(self, values: tuple, inputs: tuple) -> bool:
        if values in self.states:
            return False
        self.states[values] = inputs
        return True

    def __len__(self):
        return len(self.states)

    def concrete(self) -> list[ConcreteState]:
        return [ConcreteState(self.loc, v) for v in self.states]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(self.names))
            for v in self.states:
                w.writerow(["" if x is None else x for x in v])


def gen_states(
    p: Program,
    loc: str,
    n: int,
    d: int,
    solver: Solver,
    seed: int = 0,
    symstates: SymStateSet | None = None,
    max_attempts: int | None = None,
) -> StateSample:
    """At least one concrete state per feasible symbolic state, then more until ``n``.

    ``symstates`` (explored to at least ``d``) avoids re-running the executor.
    """
    if n < 1 or d < 0:
        raise ValueError("need n >= 1 and d >= 0")
    if symstates is None or symstates.k < d:
        symstates = exec_to_depth(p, loc, d, solver.feasibility)
    sym = symstates.upto(d)
    inputs = p.input_symbols
    sample = StateSample(loc, p.vars_at(loc))
    if not sym:
        sample.diagnostic = f"location {loc!r} is not reached within depth {d}"
        sample.exhausted = True
        log.warning(sample.diagnostic)
        return sample
    block = BlockSet(inputs)

    def draw(s) -> str:
        f = conj([*s.formulas(), block.exclusion()]) if len(block) else conj(s.formulas())
        v = solver.check_sat(f, inputs)
        if v.sat:
            point_ = tuple(v.model[x] for x in inputs)
            block.add(point_)
            sample.add(s.concretize(dict(zip(inputs, point_))), point_)
        return v.status

    live = []
    for s in sym:
        if draw(s) == "sat":
            live.append(s)
        elif len(block) and _pc_sat(solver, s, inputs):
            # the pc is satisfiable but every model is already blocked
            live.append(s)
    rng = random.Random(seed)
    attempts = 0
    limit = max_attempts if max_attempts is not None else 20 * n + 100
    while len(sample) < n and live and attempts < limit:
        attempts += 1
        s = rng.choice(live)
        status = draw(s)
        if status != "sat":
            live.remove(s)
    sample.exhausted = len(sample) < n and not live
    return sample


def _pc_sat(solver: Solver, s, inputs) -> bool:
    return solver.check_sat(conj(s.formulas()), inputs).sat


def fuzz_states(
    p: Program,
    loc: str,
    n: int,
    lo: int = -300,
    hi: int = 300,
    seed: int = 0,
    fuel: int = 100_000,
    max_draws: int | None = None,
) -> StateSample:
    """States observed by running ``p`` on uniformly random inputs in ``[lo, hi]``."""
    if lo > hi:
        raise ValueError("empty fuzz range")
    rng = random.Random(seed)
    sample = StateSample(loc, p.vars_at(loc))
    limit = max_draws if max_draws is not None else 50 * n + 100
    tried = set()
    space = (hi - lo + 1) ** len(p.params)
    for _ in range(limit):
        if len(sample) >= n or len(tried) >= space:
            break
        ins = tuple(rng.randint(lo, hi) for _ in p.params)
        if ins in tried:
            continue
        tried.add(ins)
        for st in lang.interpret(p, ins, loc, fuel).states:
            sample.add(st.values, ins)
            if len(sample) >= n:
                break
    sample.exhausted = len(tried) >= space and len(sample) < n
    return sample
