"""Sparse integer polynomials and quantifier-free formulas over them.

Everything symbolic in the package is expressed with these two types: the
symbolic values bound to program variables, path conditions, candidate
invariants and verification conditions.  Polynomials are kept in expanded
normal form, so ``==`` on :class:`Poly` is semantic equality.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union

Monomial = tuple  # tuple[tuple[str, int], ...] sorted by variable name

_ONE: Monomial = ()


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


def _natural_key(name: str):
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name))


class Poly:
    """Multivariate polynomial with arbitrary-precision integer coefficients."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, int] | None = None):
        self.terms: dict[Monomial, int] = {m: c for m, c in (terms or {}).items() if c}
        self._hash = None

    @classmethod
    def const(cls, c: int) -> "Poly":
        return cls({_ONE: c})

    @classmethod
    def var(cls, name: str) -> "Poly":
        return cls({((name, 1),): 1})

    @classmethod
    def lift(cls, x: "Poly | int") -> "Poly":
        return x if isinstance(x, Poly) else cls.const(x)

    # arithmetic -------------------------------------------------------------

    def __add__(self, other):
        other = Poly.lift(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-Poly.lift(other))

    def __rsub__(self, other):
        return Poly.lift(other) - self

    def __mul__(self, other):
        other = Poly.lift(other)
        out: dict[Monomial, int] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = Poly.const(1)
        for _ in range(n):
            out = out * self
        return out

    # inspection -------------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, int):
            other = Poly.const(other)
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return all(m == _ONE for m in self.terms)

    def const_value(self) -> int:
        return self.terms.get(_ONE, 0)

    def variables(self) -> set[str]:
        return {v for m in self.terms for v, _ in m}

    def degree(self) -> int:
        return max((sum(e for _, e in m) for m in self.terms), default=0)

    def degree_in(self, var: str) -> int:
        return max((dict(m).get(var, 0) for m in self.terms), default=0)

    def coeffs_in(self, var: str) -> list["Poly"]:
        """Coefficients of ``self`` viewed as a univariate polynomial in ``var``."""
        out = [dict() for _ in range(self.degree_in(var) + 1)]
        for m, c in self.terms.items():
            e = dict(m).get(var, 0)
            rest = tuple(p for p in m if p[0] != var)
            out[e][rest] = out[e].get(rest, 0) + c
        return [Poly(t) for t in out]

    # evaluation -------------------------------------------------------------

    def eval(self, env: Mapping[str, int]) -> int:
        total = 0
        for m, c in self.terms.items():
            for v, e in m:
                c *= env[v] ** e
            total += c
        return total

    def subs(self, env: Mapping[str, "Poly | int"]) -> "Poly":
        """Substitute polynomials (or integers) for variables."""
        out = Poly()
        cache: dict[tuple[str, int], Poly] = {}
        for m, c in self.terms.items():
            term = Poly.const(c)
            for v, e in m:
                if v in env:
                    key = (v, e)
                    if key not in cache:
                        cache[key] = Poly.lift(env[v]) ** e
                    term = term * cache[key]
                else:
                    term = term * Poly({((v, e),): 1})
            out = out + term
        return out

    def rename(self, mapping: Mapping[str, str]) -> "Poly":
        out: dict[Monomial, int] = {}
        for m, c in self.terms.items():
            nm = tuple(sorted((mapping.get(v, v), e) for v, e in m))
            out[nm] = out.get(nm, 0) + c
        return Poly(out)

    # printing ---------------------------------------------------------------

    def sorted_terms(self):
        return sorted(
            self.terms.items(),
            key=lambda mc: (-sum(e for _, e in mc[0]), [(_natural_key(v), -e) for v, e in mc[0]]),
        )

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for i, (m, c) in enumerate(self.sorted_terms()):
            factors = [v for v, e in m for _ in range(e)]
            mag = abs(c)
            body = "*".join(([str(mag)] if mag != 1 or not factors else []) + factors)
            if i == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append(("- " if c < 0 else "+ ") + body)
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Poly({self})"

    def to_smt(self, name: Callable[[str], str] = lambda v: v) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.sorted_terms():
            factors = [name(v) for v, e in m for _ in range(e)]
            if c != 1 or not factors:
                factors.insert(0, smt_int(c))
            parts.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
        return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def smt_int(c: int) -> str:
    return f"(- {-c})" if c < 0 else str(c)


# formulas ---------------------------------------------------------------------

_NEGATE = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", "<=": ">", ">": "<="}
_FLIP = {"==": "==", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}
_SMT_OP = {"==": "=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


@dataclass(frozen=True)
class Atom:
    """``poly op 0``."""

    poly: Poly
    op: str

    def __str__(self):
        return f"{self.poly} {self.op} 0"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class BoolConst:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


Formula = Union[Atom, And, Or, Not, BoolConst]
TRUE = BoolConst(True)
FALSE = BoolConst(False)


def atom(lhs: Poly | int, op: str, rhs: Poly | int = 0) -> Formula:
    """Build ``lhs op rhs`` with constant folding."""
    p = Poly.lift(lhs) - Poly.lift(rhs)
    if p.is_const():
        return BoolConst(_cmp(p.const_value(), op))
    return Atom(p, op)


def _cmp(v: int, op: str) -> bool:
    return {
        "==": v == 0, "!=": v != 0, "<": v < 0, "<=": v <= 0, ">": v > 0, ">=": v >= 0,
    }[op]


def conj(args: Iterable[Formula]) -> Formula:
    flat = []
    for a in args:
        if a == TRUE:
            continue
        if a == FALSE:
            return FALSE
        flat.extend(a.args if isinstance(a, And) else (a,))
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(args: Iterable[Formula]) -> Formula:
    flat = []
    for a in args:
        if a == FALSE:
            continue
        if a == TRUE:
            return TRUE
        flat.extend(a.args if isinstance(a, Or) else (a,))
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def neg(f: Formula) -> Formula:
    if isinstance(f, BoolConst):
        return BoolConst(not f.value)
    if isinstance(f, Atom):
        return Atom(f.poly, _NEGATE[f.op])
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def evaluate(f: Formula, env: Mapping[str, int]) -> bool:
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Atom):
        return _cmp(f.poly.eval(env), f.op)
    if isinstance(f, And):
        return all(evaluate(a, env) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, env) for a in f.args)
    return not evaluate(f.arg, env)


def free_vars(f: Formula) -> set[str]:
    if isinstance(f, BoolConst):
        return set()
    if isinstance(f, Atom):
        return f.poly.variables()
    if isinstance(f, Not):
        return free_vars(f.arg)
    out: set[str] = set()
    for a in f.args:
        out |= free_vars(a)
    return out


def substitute(f: Formula, env: Mapping[str, Poly | int]) -> Formula:
    if isinstance(f, BoolConst):
        return f
    if isinstance(f, Atom):
        return atom(f.poly.subs(env), f.op)
    if isinstance(f, Not):
        return neg(substitute(f.arg, env))
    parts = [substitute(a, env) for a in f.args]
    return conj(parts) if isinstance(f, And) else disj(parts)


def to_smt(f: Formula, name: Callable[[str], str] = lambda v: v) -> str:
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        lhs = f.poly.to_smt(name)
        if f.op == "!=":
            return f"(not (= {lhs} 0))"
        return f"({_SMT_OP[f.op]} {lhs} 0)"
    if isinstance(f, Not):
        return f"(not {to_smt(f.arg, name)})"
    op = "and" if isinstance(f, And) else "or"
    return f"({op} {' '.join(to_smt(a, name) for a in f.args)})"


def show(f: Formula) -> str:
    """Render a formula in the input language's concrete syntax."""
    if isinstance(f, BoolConst):
        return str(f)
    if isinstance(f, Atom):
        return render_relation(f.poly, f.op)
    if isinstance(f, Not):
        return f"!({show(f.arg)})"
    sep = " && " if isinstance(f, And) else " || "
    return sep.join(f"({show(a)})" for a in f.args)


def render_relation(p: Poly, op: str) -> str:
    """``p op 0`` written as ``lhs op rhs`` with the constant moved right."""
    lead = p.sorted_terms()[0][1] if p.terms else 0
    if lead < 0 and not (len(p.terms) == 1 and p.is_const()):
        p, op = -p, _FLIP[op]
    c = p.const_value()
    rest = p - c
    if rest.is_zero():
        return f"{c} {op} 0"
    return f"{rest} {op} {-c}"


__all__ = [
    "Poly", "Atom", "And", "Or", "Not", "BoolConst", "Formula", "TRUE", "FALSE",
    "atom", "conj", "disj", "neg", "evaluate", "free_vars", "substitute", "to_smt",
    "show", "render_relation", "smt_int",
]
