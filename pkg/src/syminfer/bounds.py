"""Closed-form bounds from equalities over a loop counter.

An equality ``E(t, x1..xn) = 0`` over a counter ``t`` often factors into
``t - r(x)`` terms, each ``r`` being one possible final value of ``t``.  The
factors are found by specializing the other variables at random integer points,
taking the integer roots of the resulting univariate polynomials, interpolating
a root polynomial of degree <= 2 through them, and keeping a candidate only if
exact polynomial division confirms it.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt, lcm
from typing import Optional, Sequence

from . import infer
from .logic import Formula, Poly, _natural_key, atom, conj, disj, evaluate, show

ROOT_DEGREE = 2
SAMPLE_RANGE = (-8, 8)
_DIVISOR_CAP = 10**12


@dataclass
class Root:
    value: Poly
    guard: Optional[Formula] = None
    note: str = ""

    def __str__(self):
        s = f"t = {self.value}"
        if self.guard is not None:
            s += f" when {show(self.guard)}"
        return s


@dataclass
class BoundSolution:
    counter: str
    roots: list = field(default_factory=list)  # Root
    residual: Optional[Poly] = None  # unfactored part, if it still mentions the counter
    guard_note: str = ""

    @property
    def has_residual(self) -> bool:
        return self.residual is not None

    def describe(self) -> list[str]:
        out = [f"{self.counter} = {r.value}" + (f"  when {show(r.guard)}" if r.guard is not None else "")
               for r in self.roots]
        if self.residual is not None:
            out.append(f"residual: {self.residual} == 0")
        return out


# univariate helpers -----------------------------------------------------------


def _horner(coeffs: Sequence[int], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _divisors(n: int) -> list[int]:
    n = abs(n)
    small, large = [], []
    for d in range(1, isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
    return small + large[::-1]


def integer_roots(coeffs: Sequence[int]) -> list[int]:
    """Distinct integer roots of ``sum(coeffs[i] * x**i)`` (not identically zero)."""
    coeffs = list(coeffs)
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
    if not coeffs:
        raise ValueError("zero polynomial")
    roots = []
    lead = 0
    while coeffs[lead] == 0:
        lead += 1
    if lead:
        roots.append(0)
    rest = coeffs[lead:]
    if len(rest) == 1:
        return roots
    c0 = rest[0]
    if abs(c0) > _DIVISOR_CAP:
        return roots
    for d in _divisors(c0):
        for x in (d, -d):
            if _horner(rest, x) == 0:
                roots.append(x)
    return sorted(roots)


# polynomial division by (t - r) ---------------------------------------------------


def _divide(coeffs: list, r: Poly) -> tuple[list, Poly]:
    """Synthetic division of ``sum(coeffs[i] t^i)`` by ``t - r``: (quotient, remainder)."""
    n = len(coeffs) - 1
    q = [Poly()] * n
    acc = coeffs[n]
    for i in range(n - 1, -1, -1):
        q[i] = acc
        acc = coeffs[i] + r * acc
    return q, acc


def divides(eq: Poly, t: str, r: Poly) -> bool:
    """Exact check that ``t - r`` divides ``eq`` as a polynomial."""
    return _divide(eq.coeffs_in(t), r)[1].is_zero()


def _monomials(names: Sequence[str], d: int) -> list[Poly]:
    if not names:
        return [Poly.const(1)]
    ts = infer.create_terms(names, d, cap=10**6)
    return [ts.poly(i) for i in range(len(ts))]


def _solve_exact(rows: list[list[int]]) -> Optional[list[list[Fraction]]]:
    """Inverse of a square integer matrix, or None when singular."""
    n = len(rows)
    m = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c]), None)
        if piv is None:
            return None
        m[c], m[piv] = m[piv], m[c]
        inv = 1 / m[c][c]
        m[c] = [x * inv for x in m[c]]
        for i in range(n):
            if i != c and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return [r[n:] for r in m]


def _find_root(coeffs: list, others: list, rng: random.Random, extra: int = 4) -> Optional[Poly]:
    """One ``r`` of degree <= 2 with ``t - r`` dividing the polynomial, if any."""
    monos = _monomials(others, ROOT_DEGREE)
    need = len(monos)
    points: list[dict] = []
    rows: list[list[int]] = []
    root_sets: list[list[int]] = []
    checks: list[tuple[dict, set]] = []
    lo, hi = SAMPLE_RANGE
    for _ in range(4000):
        if len(points) >= need and len(checks) >= extra:
            break
        env = {v: rng.randint(lo, hi) for v in others}
        vals = [c.eval(env) for c in coeffs]
        if vals[-1] == 0:
            continue  # degree drops at this point
        roots = integer_roots(vals)
        if not roots:
            return None  # no integer root here, so no integer root polynomial
        row = [m.eval(env) for m in monos]
        if len(points) < need:
            if infer.rank(rows + [row], need) == len(rows) + 1:
                points.append(env)
                rows.append(row)
                root_sets.append(roots)
                continue
        if len(checks) < extra:
            checks.append((env, set(roots)))
    if len(points) < need:
        return None
    inv = _solve_exact(rows)
    if inv is None:
        return None
    den = lcm(*(x.denominator for r in inv for x in r))
    B = [[int(x * den) for x in r] for r in inv]  # den * inverse
    # coefficient vector = B . y / den, built column by column
    cols = [[B[i][j] for i in range(need)] for j in range(need)]
    poly_coeffs = coeffs

    def candidates(j: int, acc: list[int]):
        if j == need:
            if all(a % den == 0 for a in acc):
                yield [a // den for a in acc]
            return
        for y in root_sets[j]:
            yield from candidates(j + 1, [a + y * b for a, b in zip(acc, cols[j])])

    for vec in candidates(0, [0] * need):
        r = Poly()
        for c, m in zip(vec, monos):
            if c:
                r = r + m * c
        if any(r.eval(env) not in roots for env, roots in checks):
            continue
        if _divide(poly_coeffs, r)[1].is_zero():
            return r
    return None


def solve_counter(eq, t: str, seed: int = 0) -> BoundSolution:
    """Roots of ``eq`` viewed as a polynomial in ``t``.

    ``eq`` is a :class:`Poly` or anything with a ``poly()`` method.
    """
    p = eq if isinstance(eq, Poly) else eq.poly()
    if t not in p.variables():
        raise ValueError(f"equality does not mention {t!r}")
    coeffs = p.coeffs_in(t)
    sol = BoundSolution(t)
    low = next(i for i, c in enumerate(coeffs) if not c.is_zero())
    if low:
        sol.roots.append(Root(Poly()))
        coeffs = coeffs[low:]
    others = sorted(p.variables() - {t}, key=_natural_key)
    rng = random.Random(seed)
    while len(coeffs) > 1:
        r = _find_root(coeffs, others, rng)
        if r is None:
            break
        if all(x.value != r for x in sol.roots):
            sol.roots.append(Root(r))
        coeffs, _ = _divide(coeffs, r)
    if len(coeffs) > 1:
        res = Poly()
        for i, c in enumerate(coeffs):
            res = res + c * Poly.var(t) ** i
        sol.residual = res
    return sol


# guards -------------------------------------------------------------------------

_GUARD_OPS = ("==", "<=", ">=", "<", ">")


def _guard_atoms(names: Sequence[str]) -> list[Formula]:
    out = []
    for v in names:
        for op in _GUARD_OPS:
            out.append(atom(Poly.var(v), op, 0))
    for v, w in itertools.combinations(names, 2):
        for op in _GUARD_OPS:
            out.append(atom(Poly.var(v), op, Poly.var(w)))
    return out


def _best_conjunction(truth, allowed, todo, max_atoms):
    """Conjunction (atom indices) true only on allowed states, covering most of ``todo``."""
    best = None
    for size in range(1, max_atoms + 1):
        for combo in itertools.combinations(range(len(truth)), size):
            cover = [all(truth[a][j] for a in combo) for j in range(len(allowed))]
            if any(c and not ok for c, ok in zip(cover, allowed)):
                continue
            n = sum(c and t for c, t in zip(cover, todo))
            if n and (best is None or n > best[0]):
                best = (n, combo, cover)
    return best


def attach_guards(
    sol: BoundSolution, states: Sequence[dict], inputs: Sequence[str], max_atoms: int = 3, max_disjuncts: int = 3
) -> BoundSolution:
    """Label each root with a guard over ``inputs``.

    A guard is a disjunction of up to ``max_disjuncts`` conjunctions of
    comparisons.  Every state satisfying it has the counter equal to the root,
    and the conjunctions are chosen greedily to cover as many of the root's
    matching states as possible.  This is a heuristic over the given states,
    not a proof.
    """
    t = sol.counter
    if len(sol.roots) <= 1:
        for r in sol.roots:
            r.guard, r.note = None, "unguarded"
        return sol
    envs = [s for s in states if all(s.get(v) is not None for v in list(inputs) + [t])]
    match = [[r.value.eval(e) == e[t] for e in envs] for r in sol.roots]
    ambiguous = sum(1 for j in range(len(envs)) if sum(m[j] for m in match) > 1)
    atoms = _guard_atoms(inputs)
    truth = [[evaluate(a, e) for e in envs] for a in atoms]
    for r, m in zip(sol.roots, match):
        todo = list(m)
        parts = []
        while any(todo) and len(parts) < max_disjuncts:
            best = _best_conjunction(truth, m, todo, max_atoms)
            if best is None:
                break
            parts.append(conj(atoms[a] for a in best[1]))
            todo = [t_ and not c for t_, c in zip(todo, best[2])]
        if not parts:
            r.guard, r.note = None, "unguarded"
        else:
            r.guard = disj(parts)
            covered = sum(m) - sum(todo)
            r.note = f"heuristic: covers {covered} of {sum(m)} matching states"
    if ambiguous:
        sol.guard_note = f"{ambiguous} states match more than one root"
    return sol
