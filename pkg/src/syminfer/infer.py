"""Candidate invariants from concrete states.

Equalities: every monomial up to a degree becomes a column, every state a row,
and the exact integer nullspace of that matrix gives the polynomial relations
satisfied by all rows.  Octagonal inequalities: the largest value each
``±v`` / ``±v ± w`` takes over the states.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

from .logic import Formula, Poly, atom, render_relation

DEFAULT_TERM_CAP = 500


class TooManyTerms(ValueError):
    pass


@dataclass(frozen=True)
class TermSet:
    """Monomials over ``names`` in graded lexicographic order."""

    names: tuple
    exps: tuple  # exponent vectors, one per term

    def __len__(self):
        return len(self.exps)

    def __iter__(self):
        return iter(self.exps)

    def poly(self, i: int) -> Poly:
        e = self.exps[i]
        mono = tuple(sorted((n, k) for n, k in zip(self.names, e) if k))
        return Poly({mono: 1})

    def label(self, i: int) -> str:
        parts = [n if k == 1 else f"{n}^{k}" for n, k in zip(self.names, self.exps[i]) if k]
        return "*".join(parts) or "1"

    def degree(self) -> int:
        return max((sum(e) for e in self.exps), default=0)

    def row(self, values: Sequence[int]) -> list[int]:
        """Valuation of every term at one state."""
        powers = [[1] for _ in values]
        top = self.degree()
        for i, v in enumerate(values):
            for _ in range(top):
                powers[i].append(powers[i][-1] * v)
        out = []
        for e in self.exps:
            acc = 1
            for i, k in enumerate(e):
                if k:
                    acc *= powers[i][k]
            out.append(acc)
        return out


def create_terms(names: Sequence[str], d: int, cap: int = DEFAULT_TERM_CAP) -> TermSet:
    """All monomials of degree <= d over ``names``, graded lex (1, x, y, x^2, x*y, ...)."""
    if d < 1:
        raise ValueError("degree must be >= 1")
    n = len(names)
    count = math.comb(n + d, d)
    if count > cap:
        raise TooManyTerms(
            f"{count} terms for {n} variables at degree {d} exceeds the cap of {cap}; lower the degree"
        )
    exps = []
    for deg in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            e = [0] * n
            for i in combo:
                e[i] += 1
            exps.append(tuple(e))
    return TermSet(tuple(names), tuple(exps))


# exact linear algebra -----------------------------------------------------------------


def _primitive(v: list[int]) -> list[int]:
    g = reduce(math.gcd, v, 0)
    return [x // g for x in v] if g > 1 else v


def rref(rows: Iterable[Sequence[int]], ncols: int) -> tuple[list[list[int]], list[int]]:
    """Integer reduced row echelon form (each row primitive, pivots positive).

    Returns (rows, pivot columns).  Every pivot column is zero in all rows but
    its own, so the result is unique for a given row space and column order.
    """
    m = [list(r) for r in dict.fromkeys(tuple(r) for r in rows) if any(r)]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == len(m):
            break
        piv = None
        for i in range(r, len(m)):
            if m[i][c] and (piv is None or abs(m[i][c]) < abs(m[piv][c])):
                piv = i
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        pr = m[r]
        if pr[c] < 0:
            pr = m[r] = [-x for x in pr]
        a = pr[c]
        for i in range(len(m)):
            if i == r:
                continue
            b = m[i][c]
            if b:
                g = math.gcd(a, b)
                fa, fb = a // g, b // g
                m[i] = _primitive([fa * x - fb * y for x, y in zip(m[i], pr)])
        pivots.append(c)
        r += 1
    m = m[:r]
    # make pivots positive and rows primitive
    out = []
    for row, c in zip(m, pivots):
        row = _primitive(row)
        if row[c] < 0:
            row = [-x for x in row]
        out.append(row)
    return out, pivots


def nullspace(rows: Iterable[Sequence[int]], ncols: int) -> list[list[int]]:
    """Integer basis of {x : row . x = 0 for every row}."""
    red, pivots = rref(rows, ncols)
    pivot_set = set(pivots)
    basis = []
    lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (row[c] for row, c in zip(red, pivots)), 1)
    for f in range(ncols):
        if f in pivot_set:
            continue
        x = [0] * ncols
        x[f] = lcm
        for row, c in zip(red, pivots):
            if row[f]:
                x[c] = -row[f] * lcm // row[c]
        basis.append(canonical(x))
    return basis


def rank(rows: Iterable[Sequence[int]], ncols: int) -> int:
    return len(rref(rows, ncols)[1])


def canonical(v: Sequence[int]) -> list[int]:
    """Primitive integer vector whose first nonzero entry is positive."""
    v = _primitive(list(v))
    lead = next((x for x in v if x), 0)
    return [-x for x in v] if lead < 0 else v


# equalities -------------------------------------------------------------------


@dataclass(frozen=True)
class EqInvariant:
    """``sum(coeffs[i] * terms[i]) == 0``."""

    terms: TermSet
    coeffs: tuple

    def __post_init__(self):
        if not any(self.coeffs):
            raise ValueError("all-zero equality")
        object.__setattr__(self, "coeffs", tuple(canonical(self.coeffs)))

    def poly(self) -> Poly:
        out = Poly()
        for i, c in enumerate(self.coeffs):
            if c:
                out = out + self.terms.poly(i) * c
        return out

    def formula(self) -> Formula:
        return atom(self.poly(), "==")

    def holds(self, values: Sequence[int]) -> bool:
        return sum(c * t for c, t in zip(self.coeffs, self.terms.row(values)) if c) == 0

    def __str__(self):
        return render_relation(self.poly(), "==")


def state_rows(terms: TermSet, states) -> list[list[int]]:
    """Distinct term-valuation rows; states with unset variables are skipped."""
    rows = {}
    for s in states:
        values = s.values if hasattr(s, "values") else s
        if any(v is None for v in values):
            continue
        rows.setdefault(tuple(values), None)
    return [terms.row(v) for v in rows]


def infer_eqts(terms: TermSet, states) -> list[EqInvariant]:
    """Equalities over ``terms`` satisfied by every state (a nullspace basis)."""
    rows = state_rows(terms, states)
    if not rows:
        raise ValueError("need at least one state")
    return [EqInvariant(terms, tuple(v)) for v in nullspace(rows, len(terms))]


def reduce_basis(eqs: Sequence[EqInvariant], order: Sequence[int] | None = None) -> list[EqInvariant]:
    """Canonical basis (reduced echelon form) of the span of ``eqs``.

    ``order`` permutes the columns considered first when choosing pivots.
    """
    if not eqs:
        return []
    terms = eqs[0].terms
    n = len(terms)
    perm = list(order) if order is not None else list(range(n))
    rows = [[e.coeffs[j] for j in perm] for e in eqs]
    red, _ = rref(rows, n)
    out = []
    for row in red:
        coeffs = [0] * n
        for k, j in enumerate(perm):
            coeffs[j] = row[k]
        out.append(EqInvariant(terms, tuple(coeffs)))
    return out


def in_span(e: EqInvariant, basis: Sequence[EqInvariant]) -> bool:
    if not basis:
        return False
    n = len(e.terms)
    rows = [b.coeffs for b in basis]
    return rank(rows + [e.coeffs], n) == rank(rows, n)


# octagons ---------------------------------------------------------------------


@dataclass(frozen=True)
class OctTerm:
    """``sum(sign * var)`` over one or two variables, signs in {-1, +1}."""

    parts: tuple  # ((name, sign), ...)

    def poly(self) -> Poly:
        out = Poly()
        for name, sign in self.parts:
            out = out + Poly.var(name) * sign
        return out

    def value(self, env: dict) -> int:
        return sum(sign * env[name] for name, sign in self.parts)

    def __str__(self):
        return str(self.poly())


def oct_terms(names: Sequence[str]) -> list[OctTerm]:
    """``±v`` for each variable, then ``±(v - w)`` and ``±(v + w)`` for each pair."""
    out = []
    for v in names:
        out += [OctTerm(((v, 1),)), OctTerm(((v, -1),))]
    for v, w in itertools.combinations(names, 2):
        out += [
            OctTerm(((v, 1), (w, -1))),
            OctTerm(((v, -1), (w, 1))),
            OctTerm(((v, 1), (w, 1))),
            OctTerm(((v, -1), (w, -1))),
        ]
    return out


@dataclass(frozen=True)
class Inequality:
    """``term <= bound``."""

    term: OctTerm
    bound: int

    def poly(self) -> Poly:
        return self.term.poly() - self.bound

    def formula(self) -> Formula:
        return atom(self.term.poly(), "<=", self.bound)

    def __str__(self):
        return render_relation(self.poly(), "<=")


def oct_bounds_from_states(states, names: Sequence[str]) -> list[Inequality]:
    """The tightest ``term <= k`` over the given states, for every octagonal term."""
    envs = []
    for s in states:
        values = s.values if hasattr(s, "values") else s
        if all(v is not None for v in values):
            envs.append(dict(zip(names, values)))
    if not envs:
        raise ValueError("need at least one state")
    return [Inequality(t, max(t.value(e) for e in envs)) for t in oct_terms(names)]
