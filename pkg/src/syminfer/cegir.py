"""Counterexample-guided inference and its bounded verifier.

One :class:`Engine` serves one program.  It keeps a single symbolic state set
per location, deepened on demand, and every check (equality candidates,
octagonal probes, redundancy) is answered against it.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import infer
from .cstates import BlockSet, StateSample, fuzz_states, gen_states
from .infer import EqInvariant, Inequality, OctTerm
from .lang import ConcreteState, Program
from .logic import Formula, conj, neg
from .smt import Solver, encode_states
from .symexec import SymStateSet, exec_to_depth, extend

log = logging.getLogger(__name__)

STATUS = {"sat": "refuted", "unsat": "invariant", "unknown": "unknown"}


@dataclass
class Candidate:
    prop: EqInvariant | Inequality
    is_inv: Optional[bool] = None
    depth: Optional[int] = None  # deepest state set the proof was checked against
    transcript: str = ""

    @property
    def kind(self) -> str:
        return "eq" if isinstance(self.prop, EqInvariant) else "ineq"

    def formula(self) -> Formula:
        return self.prop.formula()

    def sort_key(self):
        if isinstance(self.prop, EqInvariant):
            return (0, self.prop.poly().degree(), str(self.prop))
        return (1, len(self.prop.term.parts), str(self.prop.term), self.prop.bound)

    def __str__(self):
        return str(self.prop)


@dataclass
class VerifyOutcome:
    status: str  # "invariant" | "refuted" | "unknown"
    settled_depth: int
    cex: list = field(default_factory=list)  # ConcreteState
    cex_inputs: list = field(default_factory=list)  # input tuple per cex
    transcript: str = ""
    diagnostic: Optional[str] = None


@dataclass
class EqResult:
    invariants: list  # Candidate
    terms: Optional[infer.TermSet]
    refuted: int = 0
    unknown: int = 0
    iterations: int = 0
    bootstrap: int = 0
    states: list = field(default_factory=list)  # value tuples used for inference
    timed_out: bool = False
    warnings: list = field(default_factory=list)


class BudgetExceeded(Exception):
    pass


class Engine:
    def __init__(
        self,
        program: Program,
        solver: Solver,
        start_depth: int = 10,
        max_depth: int = 20,
        seed: int = 0,
        bootstrap: str = "symbolic",
        fuzz_range: tuple = (-300, 300),
        oversample: float = 1.5,
        term_cap: int = infer.DEFAULT_TERM_CAP,
        workers: int = 1,
        budget_secs: float | None = None,
    ):
        if not 0 <= start_depth <= max_depth:
            raise ValueError("need 0 <= start_depth <= max_depth")
        self.p = program
        self.solver = solver
        self.start_depth = start_depth
        self.max_depth = max_depth
        self.seed = seed
        self.bootstrap = bootstrap
        self.fuzz_range = fuzz_range
        self.oversample = oversample
        self.term_cap = term_cap
        self.workers = max(1, workers)
        self.deadline = None if budget_secs is None else time.monotonic() + budget_secs
        self._sets: dict[str, SymStateSet] = {}
        self._vcs: dict[tuple, Formula] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()
        self.symexec_seconds = 0.0

    # symbolic states ------------------------------------------------------------

    def expired(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    def _lock(self, loc: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(loc, threading.Lock())

    def symstates(self, loc: str, k: int) -> SymStateSet:
        """The cached state set for ``loc``, deepened to at least ``k``."""
        with self._lock(loc):
            s = self._sets.get(loc)
            if s is None or s.k < k:
                start = time.perf_counter()
                if s is None:
                    s = exec_to_depth(self.p, loc, k, self.solver.feasibility)
                else:
                    s = extend(s, k, self.solver.feasibility)
                self.symexec_seconds += time.perf_counter() - start
                self._sets[loc] = s
            return s

    def states_at(self, loc: str, k: int) -> list:
        return self.symstates(loc, k).upto(k)

    def _vc(self, loc: str, k: int) -> Formula:
        key = (loc, k)
        with self._guard:
            hit = self._vcs.get(key)
        if hit is None:
            hit = encode_states(self.states_at(loc, k), self.p.vars_at(loc))
            with self._guard:
                self._vcs[key] = hit
        return hit

    # verification -----------------------------------------------------------------

    def verify(self, loc: str, cand: Formula, block: BlockSet | None = None, k0: int | None = None) -> VerifyOutcome:
        """Check ``cand`` against the states at ``loc``, deepening until two depths agree.

        States matching a point of ``block`` are excluded from the check.
        """
        k = self.start_depth if k0 is None else k0
        names = self.p.vars_at(loc)
        inputs = self.p.input_symbols
        symbols = list(names) + list(inputs)
        prev = None
        last = None
        while True:
            if not self.states_at(loc, k):
                return VerifyOutcome(
                    "unknown", k, diagnostic=f"location {loc!r} is not reached within depth {k}"
                )
            parts = [self._vc(loc, k)]
            if block is not None and len(block):
                parts.append(block.exclusion())
            parts.append(neg(cand))
            v = self.solver.check_sat(conj(parts), symbols)
            if v.status == prev:
                return VerifyOutcome(STATUS[prev], k - 1, transcript=last.transcript)
            if v.sat:
                values = tuple(v.model[n] for n in names)
                ins = tuple(v.model[x] for x in inputs)
                return VerifyOutcome("refuted", k, [ConcreteState(loc, values)], [ins], v.transcript)
            if k >= self.max_depth:
                diag = f"depth ceiling {self.max_depth} reached"
                return VerifyOutcome(STATUS[v.status], k, transcript=v.transcript, diagnostic=diag)
            prev, last = v.status, v
            k += 1

    # equalities -------------------------------------------------------------------

    def _map(self, fn: Callable, items: Sequence) -> list:
        if self.workers == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.workers) as pool:
            return list(pool.map(fn, items))

    def bootstrap_states(self, loc: str, n: int) -> StateSample:
        if self.bootstrap == "fuzz":
            lo, hi = self.fuzz_range
            return fuzz_states(self.p, loc, n, lo, hi, self.seed)
        k = self.start_depth
        return gen_states(self.p, loc, n, k, self.solver, self.seed, self.symstates(loc, k))

    def cegir_eqts(self, loc: str, d: int) -> EqResult:
        """Equalities of degree <= ``d`` at ``loc``, each proved by :meth:`verify`."""
        names = self.p.vars_at(loc)
        if not names:
            return EqResult([], None)
        terms = infer.create_terms(names, d, self.term_cap)
        sample = self.bootstrap_states(loc, math.ceil(len(terms) * self.oversample))
        out = EqResult([], terms, bootstrap=len(sample))
        if sample.diagnostic:
            out.warnings.append(sample.diagnostic)
        states = [v for v in sample.states if None not in v]
        if not states:
            out.warnings.append(f"no concrete states at {loc!r}")
            return out
        seen = set(states)
        block = BlockSet(names)
        proved: list[EqInvariant] = []
        cands = infer.infer_eqts(terms, states)
        while cands:
            if self.expired():
                out.timed_out = True
                break
            out.iterations += 1
            outcomes = self._map(lambda e: self.verify(loc, e.formula(), block), cands)
            fresh = []
            for e, o in zip(cands, outcomes):
                if o.status == "invariant":
                    proved.append(e)
                    out.invariants.append(Candidate(e, True, o.settled_depth, o.transcript))
                elif o.status == "refuted":
                    out.refuted += 1
                    for c in o.cex:
                        if c.values not in seen:
                            seen.add(c.values)
                            fresh.append(c.values)
                else:
                    out.unknown += 1
                    out.warnings.append(f"unknown verdict for {e}" + (f": {o.diagnostic}" if o.diagnostic else ""))
            if not fresh:
                break
            for v in fresh:
                block.add(v)
                states.append(v)
            cands = [e for e in infer.infer_eqts(terms, states) if not infer.in_span(e, proved)]
        out.states = states
        return out

    # inequalities -----------------------------------------------------------------

    def cegir_oct(
        self, loc: str, term: OctTerm, lo: int = -10, hi: int = 10, witness: int | None = None,
        counter: Optional[list] = None,
    ) -> Optional[Candidate]:
        """The least ``k`` in ``[lo, hi]`` with ``term <= k`` proved, or None.

        ``witness`` is a value the term is known to reach; bounds below it are
        not tried.  ``counter`` (a one-element list) accumulates the number of
        binary-search verify calls, the range pre-check excluded.
        """
        if lo > hi:
            raise ValueError("empty bound range")
        if witness is not None and witness > hi:
            return None

        def check(b: int) -> VerifyOutcome:
            return self.verify(loc, Inequality(term, b).formula())

        top = check(hi)
        if top.status != "invariant":
            return None
        best = top
        lo_, hi_ = (lo, hi) if witness is None else (max(lo, witness), hi)
        while hi_ - lo_ > 1 and not self.expired():
            mid = -((-(lo_ + hi_)) // 2)
            o = check(mid)
            if counter is not None:
                counter[0] += 1
            if o.status == "invariant":
                hi_, best = mid, o
            elif o.status == "refuted":
                c = term.value(o.cex[0].as_dict(self.p.vars_at(loc)))
                lo_ = min(max(c, mid + 1), hi_)
            else:
                lo_ = mid + 1
        if hi_ - lo_ == 1:
            o = check(lo_)
            if counter is not None:
                counter[0] += 1
            if o.status == "invariant":
                hi_, best = lo_, o
        return Candidate(Inequality(term, hi_), True, best.settled_depth, best.transcript)

    def octagons(self, loc: str, lo: int, hi: int, witnesses: Sequence | None = None) -> list:
        names = self.p.vars_at(loc)
        terms = infer.oct_terms(names)
        wit = None
        if witnesses:
            envs = [dict(zip(names, v)) for v in witnesses if None not in v]
            wit = [max(t.value(e) for e in envs) for t in terms] if envs else None
        jobs = list(range(len(terms)))
        found = self._map(lambda i: self.cegir_oct(loc, terms[i], lo, hi, wit[i] if wit else None), jobs)
        return [c for c in found if c is not None]

    # redundancy -------------------------------------------------------------------

    def remove_redundant(self, cands: Sequence[Candidate]) -> list:
        """Drop every candidate implied by the conjunction of the others."""
        keep = sorted(cands, key=lambda c: c.sort_key())
        for c in list(reversed(keep)):
            others = [o.formula() for o in keep if o is not c]
            if not others:
                break
            if self.solver.check_implication(conj(others), c.formula()).unsat:
                keep.remove(c)
        return keep


def remove_redundant(solver: Solver, cands: Sequence[Candidate]) -> list:
    """Standalone form of :meth:`Engine.remove_redundant`."""
    keep = sorted(cands, key=lambda c: c.sort_key())
    for c in list(reversed(keep)):
        others = [o.formula() for o in keep if o is not c]
        if others and solver.check_implication(conj(others), c.formula()).unsat:
            keep.remove(c)
    return keep
