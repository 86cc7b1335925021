"""Depth-bounded symbolic execution of ``.mvl`` programs.

Inputs are the symbols ``X1..Xn`` (one per parameter, in order).  Depth counts
*semantic* branches: a branch costs one unit of depth only when both outcomes
are feasible under the current path condition.  When one outcome is
infeasible the path follows the other for free.  ``assume`` never costs depth.

Exploration is layered: the states with depth <= k are produced first for
k = 0, then the paths that were cut off at the bound (the frontier) are resumed
for k = 1, and so on.  A :class:`SymStateSet` keeps its frontier, so
:func:`extend` continues from it, and ``exec_to_depth(p, L, k)`` equals
``extend(exec_to_depth(p, L, j), k)`` for every ``j < k``, state order
included.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import lang
from .lang import Assign, Assume, Decl, If, LocMark, Program, While
from .logic import FALSE, TRUE, Formula, Poly, evaluate, neg, show, to_smt

log = logging.getLogger(__name__)

# feasibility oracle: list of constraints -> "sat" | "unsat" | "unknown"
Feasibility = Callable[[list], str]


@dataclass(frozen=True)
class Constraint:
    formula: Formula
    origin: str  # e.g. "while@5:3:T"
    charged: bool  # did this branch cost depth?

    def __str__(self):
        return show(self.formula)


@dataclass(frozen=True)
class SymState:
    loc: str
    env: tuple  # Poly | None per variable in scope at loc (canonical order)
    pc: tuple  # Constraint, ...
    depth: int
    path: str  # branch decisions taken so far: one char per branch
    pc_unknown: bool = False  # some feasibility query on this path was unknown

    def formulas(self) -> list:
        return [c.formula for c in self.pc]

    def concretize(self, inputs: dict) -> tuple:
        return tuple(None if e is None else e.eval(inputs) for e in self.env)

    def holds_under(self, inputs: dict) -> bool:
        return all(evaluate(c.formula, inputs) for c in self.pc)


# continuation items
@dataclass(frozen=True)
class _LoopHead:
    loop: While


@dataclass
class _Path:
    env: dict
    pc: tuple
    depth: int
    path: str
    cont: Optional[tuple]  # linked list (item, rest)
    steps: int = 0
    pc_unknown: bool = False


def _push(items, cont):
    for s in reversed(items):
        cont = (s, cont)
    return cont


@dataclass
class SymStateSet:
    program: Program
    loc: str
    k: int
    states: list
    frontier: list = field(default_factory=list, repr=False)
    dropped_paths: int = 0  # paths abandoned for exceeding the step limit

    @property
    def names(self) -> tuple:
        return self.program.vars_at(self.loc)

    def upto(self, k: int) -> list:
        """States of depth <= k (a prefix of ``states``)."""
        if k > self.k:
            raise ValueError(f"set only explored to depth {self.k}")
        return [s for s in self.states if s.depth <= k]

    # serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "program": program_hash(self.program),
            "loc": self.loc,
            "k": self.k,
            "states": [
                {
                    "loc": s.loc,
                    "depth": s.depth,
                    "path": s.path,
                    "env": {n: (None if e is None else str(e)) for n, e in zip(self.names, s.env)},
                    "pc": [str(c) for c in s.pc],
                    "pc_smt": [to_smt(c.formula) for c in s.pc],
                    "pc_origin": [[c.origin, c.charged] for c in s.pc],
                    "pc_unknown": s.pc_unknown,
                }
                for s in self.states
            ],
        }

    @classmethod
    def from_json(cls, p: Program, doc: dict) -> "SymStateSet":
        """Rebuild a (non-extensible) state set from :meth:`to_json` output."""
        from .smt import formula_from_smt

        if doc["program"] != program_hash(p):
            raise ValueError("cached states belong to a different program")
        states = []
        for d in doc["states"]:
            env = tuple(None if d["env"][n] is None else _poly(d["env"][n]) for n in p.vars_at(doc["loc"]))
            pc = tuple(
                Constraint(formula_from_smt(text), origin, charged)
                for text, (origin, charged) in zip(d["pc_smt"], d["pc_origin"])
            )
            states.append(SymState(d["loc"], env, pc, d["depth"], d["path"], d["pc_unknown"]))
        out = cls(p, doc["loc"], doc["k"], states)
        out.frontier = None  # marks a set that cannot be extended
        return out


def _poly(text: str) -> Poly:
    return lang.to_poly(lang.parse_aexpr(text), Poly.var)


def program_hash(p: Program) -> str:
    return hashlib.sha256(lang.pretty_print(p).encode()).hexdigest()[:16]


class Executor:
    """Runs paths of one program towards one location."""

    def __init__(self, p: Program, loc: str, feas: Feasibility, max_steps: int = 20_000):
        self.p = p
        self.loc = loc
        self.names = p.vars_at(loc)
        self.feas = feas
        self.max_steps = max_steps
        self.dropped = 0

    def initial(self) -> _Path:
        env = {v: Poly.var(x) for v, x in zip(self.p.params, self.p.input_symbols)}
        return _Path(env, (), 0, "", _push(self.p.body, None))

    def lookup(self, env):
        def get(name):
            v = env[name]
            if v is None:
                raise lang.ExecError(f"read of unset variable {name!r}")
            return v
        return get

    def _query(self, pc, f) -> str:
        return self.feas([c.formula for c in pc] + [f])

    def run(self, start: list, k: int, out: list, frontier: list) -> None:
        """Run every path in ``start`` (depth-first) collecting states into ``out``.

        Paths that would need a (k+1)-th charged branch go to ``frontier``.
        """
        stack = list(reversed(start))
        while stack:
            path = stack.pop()
            forks = self._advance(path, k, out, frontier)
            stack.extend(reversed(forks))

    def _snapshot(self, path: _Path, out: list) -> None:
        env = tuple(path.env.get(v) for v in self.names)
        out.append(SymState(self.loc, env, path.pc, path.depth, path.path, path.pc_unknown))

    def _advance(self, path: _Path, k: int, out: list, frontier: list) -> list:
        """Execute ``path`` until it ends or forks; return the forked paths."""
        get = self.lookup(path.env)
        while path.cont is not None:
            item, path.cont = path.cont
            path.steps += 1
            if path.steps > self.max_steps:
                self.dropped += 1
                log.warning("path %s abandoned after %d steps", path.path, self.max_steps)
                return []
            if isinstance(item, Assign):
                path.env[item.name] = lang.to_poly(item.expr, get)
            elif isinstance(item, Decl):
                for name, init in item.items:
                    path.env[name] = None if init is None else lang.to_poly(init, get)
            elif isinstance(item, LocMark):
                if item.label == self.loc:
                    self._snapshot(path, out)
            elif isinstance(item, Assume):
                f = lang.to_formula(item.cond, get)
                origin = f"assume@{item.pos[0]}:{item.pos[1]}"
                if f == TRUE:
                    continue
                verdict = "unsat" if f == FALSE else self._query(path.pc, f)
                if verdict == "unsat":
                    return []
                path.pc = path.pc + (Constraint(f, origin, False),)
                path.pc_unknown |= verdict == "unknown"
            elif isinstance(item, If):
                taken = self._branch(path, item.cond, f"if@{item.pos[0]}:{item.pos[1]}", k, frontier)
                if taken is None:
                    return []
                if isinstance(taken, list):
                    # forked: true side runs the then-branch, false side the else-branch
                    t, e = taken
                    if t is not None:
                        t.cont = _push(item.then, t.cont)
                    if e is not None:
                        e.cont = _push(item.orelse, e.cont)
                    return self._route([t, e], k, frontier)
                path.cont = _push(item.then if taken else item.orelse, path.cont)
            elif isinstance(item, While):
                path.cont = (_LoopHead(item), path.cont)
            elif isinstance(item, _LoopHead):
                loop = item.loop
                if loop.head == self.loc:
                    self._snapshot(path, out)
                taken = self._branch(path, loop.cond, f"while@{loop.pos[0]}:{loop.pos[1]}", k, frontier)
                if taken is None:
                    return []
                if isinstance(taken, list):
                    t, e = taken
                    if t is not None:
                        t.cont = _push(loop.body, (item, t.cont))
                    return self._route([t, e], k, frontier)
                if taken:
                    path.cont = _push(loop.body, (item, path.cont))
            else:
                raise TypeError(item)
        return []

    def _route(self, forks: list, k: int, frontier: list) -> list:
        live = [f for f in forks if f is not None]
        if live and live[0].depth > k:
            frontier.extend(live)
            return []
        return live

    def _branch(self, path: _Path, cond, origin: str, k: int, frontier: list):
        """Decide a branch.

        Returns True/False for a free (single-feasible) branch, a two-element
        list of forked paths when both sides are feasible, or None when the
        path itself turned out infeasible.
        """
        f = lang.to_formula(cond, self.lookup(path.env))
        if f == TRUE:
            path.path += "t"
            return True
        if f == FALSE:
            path.path += "f"
            return False
        nf = neg(f)
        known = {c.formula for c in path.pc}
        if f in known or nf in known:
            path.path += "t" if f in known else "f"
            return f in known
        on_true = self._query(path.pc, f)
        # a satisfiable pc with an unsatisfiable true side makes the false side sat
        on_false = "sat" if on_true == "unsat" and not path.pc_unknown else self._query(path.pc, nf)
        if on_true == "unsat" and on_false == "unsat":
            return None
        if on_true == "unsat":
            path.pc = path.pc + (Constraint(nf, origin + ":F", False),)
            path.path += "f"
            path.pc_unknown |= on_false == "unknown"
            return False
        if on_false == "unsat":
            path.pc = path.pc + (Constraint(f, origin + ":T", False),)
            path.path += "t"
            path.pc_unknown |= on_true == "unknown"
            return True
        forks = []
        for formula, tag, verdict in ((f, "T", on_true), (nf, "F", on_false)):
            forks.append(
                _Path(
                    dict(path.env),
                    path.pc + (Constraint(formula, f"{origin}:{tag}", True),),
                    path.depth + 1,
                    path.path + tag,
                    path.cont,
                    path.steps,
                    path.pc_unknown or verdict == "unknown",
                )
            )
        return forks


def exec_to_depth(p: Program, loc: str, k: int, feas: Feasibility, max_steps: int = 20_000) -> SymStateSet:
    """All symbolic states at ``loc`` reachable with semantic depth <= ``k``."""
    if k < 0:
        raise ValueError("depth bound must be >= 0")
    p.vars_at(loc)
    ex = Executor(p, loc, feas, max_steps)
    states: list = []
    frontier: list = []
    ex.run([ex.initial()], 0, states, frontier)
    out = SymStateSet(p, loc, 0, states, frontier, ex.dropped)
    return extend(out, k, feas, max_steps) if k > 0 else out


def extend(s: SymStateSet, k: int, feas: Feasibility, max_steps: int = 20_000) -> SymStateSet:
    """Deepen ``s`` to bound ``k`` by resuming its frontier (``s`` is not modified)."""
    if k <= s.k:
        raise ValueError(f"extend needs a bound larger than {s.k}, got {k}")
    if s.frontier is None:
        raise ValueError("this state set was loaded from a cache and cannot be extended")
    ex = Executor(s.program, s.loc, feas, max_steps)
    states = list(s.states)
    frontier = _clone(s.frontier)
    for layer in range(s.k + 1, k + 1):
        nxt: list = []
        ex.run(frontier, layer, states, nxt)
        frontier = nxt
    return SymStateSet(s.program, s.loc, k, states, frontier, s.dropped_paths + ex.dropped)


def _clone(paths: list) -> list:
    return [_Path(dict(q.env), q.pc, q.depth, q.path, q.cont, q.steps, q.pc_unknown) for q in paths]


def state_formula_smt(s: SymState, names) -> str:
    """Debug rendering of a state as an SMT-LIB conjunction."""
    parts = [to_smt(c.formula) for c in s.pc]
    parts += [f"(= {n} {e.to_smt()})" for n, e in zip(names, s.env) if e is not None]
    return f"(and {' '.join(parts)})" if parts else "true"
