"""The ``.mvl`` mini imperative language: parser, printer and interpreter.

A program is a single function over integer parameters::

    fn idiv(x1: int, x2: int) {
      assume(x1 >= 0 && x2 >= 1);
      int y1 = 0, y2 = 0, y3 = x1;
      @L;
      while (y3 != 0) {
        ...
      }
    }

``@L;`` marks a location.  A marker written immediately before a ``while``
names the loop head: it is visited every time the loop condition is about to
be evaluated, including the final, failing evaluation.  Anywhere else it is
visited when control passes it.

Variables are block scoped, and every variable name may be declared only once
per program, so a name identifies a variable.  The canonical variable order
is declaration order (parameters first); the variables visible at a location
are listed in that order and index the values of a :class:`ConcreteState`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterator, Union

from .logic import Formula, Poly, atom, conj, disj, neg

# Identifiers the SMT layer cannot use as constant names, plus the input
# symbol namespace X1, X2, ...
RESERVED = frozenset(
    """fn int assume while if else true false and or not ite distinct abs div mod
    let xor exists forall par select store Int Bool Real to_real to_int is_int
    assert push pop""".split()
)
_INPUT_SYMBOL = re.compile(r"X\d+$")


class LangError(Exception):
    """Static error in a program (syntax, scoping, labels)."""

    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


class ExecError(Exception):
    """Runtime error during interpretation (e.g. reading an unset variable)."""


# AST ---------------------------------------------------------------------------

Pos = tuple  # (line, col)


@dataclass(frozen=True)
class Num:
    value: int
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    arg: "AExpr"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # + - *
    left: "AExpr"
    right: "AExpr"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


AExpr = Union[Num, Var, Neg, BinOp]


@dataclass(frozen=True)
class Cmp:
    op: str  # == != < <= > >=
    left: AExpr
    right: AExpr
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class LNot:
    arg: "BExpr"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class LBin:
    op: str  # && ||
    left: "BExpr"
    right: "BExpr"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


BExpr = Union[Cmp, BoolLit, LNot, LBin]


@dataclass(frozen=True)
class Assume:
    cond: BExpr
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Decl:
    items: tuple  # ((name, AExpr | None), ...)
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Assign:
    name: str
    expr: AExpr
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class While:
    cond: BExpr
    body: tuple
    head: str | None = None  # loop-head location label
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: BExpr
    then: tuple
    orelse: tuple = ()
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class LocMark:
    label: str
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


Stmt = Union[Assume, Decl, Assign, While, If, LocMark]


@dataclass(frozen=True)
class Program:
    name: str
    params: tuple  # parameter names, all of type int
    body: tuple
    # derived by the scope checker
    var_order: tuple = field(default=(), compare=False, repr=False)
    loc_vars: dict = field(default_factory=dict, compare=False, repr=False)
    locations: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        order, loc_vars, locs = _check_scopes(self)
        object.__setattr__(self, "var_order", order)
        object.__setattr__(self, "loc_vars", loc_vars)
        object.__setattr__(self, "locations", locs)

    @property
    def input_symbols(self) -> tuple:
        return tuple(f"X{i + 1}" for i in range(len(self.params)))

    def vars_at(self, loc: str) -> tuple:
        if loc not in self.loc_vars:
            raise KeyError(f"unknown location {loc!r}")
        return self.loc_vars[loc]


@dataclass(frozen=True)
class ConcreteState:
    loc: str
    values: tuple  # int, or None for a declared-but-unset variable

    def as_dict(self, names) -> dict:
        return dict(zip(names, self.values))


# scope checking ---------------------------------------------------------------


def _check_scopes(p: Program):
    order: list[str] = []
    declared: set[str] = set()
    loc_vars: dict[str, tuple] = {}
    locs: list[str] = []

    def declare(name, pos):
        if name in RESERVED or _INPUT_SYMBOL.match(name):
            raise LangError(f"reserved identifier {name!r}", *pos)
        if name in declared:
            raise LangError(f"variable {name!r} declared twice", *pos)
        declared.add(name)
        order.append(name)

    def use_a(e, scope, pos):
        if isinstance(e, Var):
            if e.name not in scope:
                raise LangError(f"use of undeclared variable {e.name!r}", *(e.pos if e.pos != (0, 0) else pos))
        elif isinstance(e, Neg):
            use_a(e.arg, scope, pos)
        elif isinstance(e, BinOp):
            use_a(e.left, scope, pos)
            use_a(e.right, scope, pos)

    def use_b(b, scope, pos):
        if isinstance(b, Cmp):
            use_a(b.left, scope, pos)
            use_a(b.right, scope, pos)
        elif isinstance(b, LNot):
            use_b(b.arg, scope, pos)
        elif isinstance(b, LBin):
            use_b(b.left, scope, pos)
            use_b(b.right, scope, pos)

    def mark(label, scope, pos):
        if label in loc_vars:
            raise LangError(f"duplicate location label {label!r}", *pos)
        locs.append(label)
        loc_vars[label] = list(scope)  # resolved to canonical order below

    def block(stmts, scope):
        scope = list(scope)
        for s in stmts:
            if isinstance(s, Assume):
                use_b(s.cond, scope, s.pos)
            elif isinstance(s, Decl):
                for name, init in s.items:
                    if init is not None:
                        use_a(init, scope, s.pos)
                    declare(name, s.pos)
                    scope.append(name)
            elif isinstance(s, Assign):
                if s.name not in scope:
                    raise LangError(f"assignment to undeclared variable {s.name!r}", *s.pos)
                use_a(s.expr, scope, s.pos)
            elif isinstance(s, While):
                if s.head is not None:
                    mark(s.head, scope, s.pos)
                use_b(s.cond, scope, s.pos)
                block(s.body, scope)
            elif isinstance(s, If):
                use_b(s.cond, scope, s.pos)
                block(s.then, scope)
                block(s.orelse, scope)
            elif isinstance(s, LocMark):
                mark(s.label, scope, s.pos)
            else:
                raise TypeError(f"not a statement: {s!r}")

    for name in p.params:
        declare(name, (0, 0))
    block(p.body, list(p.params))
    rank = {v: i for i, v in enumerate(order)}
    resolved = {k: tuple(sorted(v, key=rank.__getitem__)) for k, v in loc_vars.items()}
    return tuple(order), resolved, tuple(locs)


# lexer ------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|//[^\n]*)
  | (?P<nl>\n)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*<>=!(){};,:@])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # int ident op eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise LangError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            toks.append(Token(kind, m.group(), line, i - line_start + 1))
        i = m.end()
    toks.append(Token("eof", "", line, i - line_start + 1))
    return toks


# parser -----------------------------------------------------------------------

_CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "ident")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            t = self.tok
            raise LangError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.advance()

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident" or t.text in ("fn", "int", "assume", "while", "if", "else", "true", "false"):
            raise LangError(f"expected identifier, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.advance()

    # program / statements

    def program(self) -> Program:
        self.expect("fn")
        name = self.ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                params.append(self.ident().text)
                self.expect(":")
                self.expect("int")
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        body = self.block()
        if self.tok.kind != "eof":
            raise LangError(f"trailing input {self.tok.text!r}", self.tok.line, self.tok.col)
        return Program(name, tuple(params), body)

    def block(self) -> tuple:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise LangError("unterminated block", self.tok.line, self.tok.col)
            stmts.append(self.stmt())
        self.advance()
        # a marker directly before a loop labels the loop head
        out: list = []
        for s in stmts:
            if isinstance(s, While) and out and isinstance(out[-1], LocMark) and s.head is None:
                mark = out.pop()
                s = While(s.cond, s.body, mark.label, s.pos)
            out.append(s)
        return tuple(out)

    def stmt(self) -> Stmt:
        t = self.tok
        pos = (t.line, t.col)
        if self.at("assume"):
            self.advance()
            self.expect("(")
            c = self.bexpr()
            self.expect(")")
            self.expect(";")
            return Assume(c, pos)
        if self.at("int"):
            self.advance()
            items = []
            while True:
                name = self.ident().text
                init = None
                if self.at("="):
                    self.advance()
                    init = self.aexpr()
                items.append((name, init))
                if not self.at(","):
                    break
                self.advance()
            self.expect(";")
            return Decl(tuple(items), pos)
        if self.at("while"):
            self.advance()
            self.expect("(")
            c = self.bexpr()
            self.expect(")")
            return While(c, self.block(), None, pos)
        if self.at("if"):
            self.advance()
            self.expect("(")
            c = self.bexpr()
            self.expect(")")
            then = self.block()
            orelse = ()
            if self.at("else"):
                self.advance()
                orelse = self.block()
            return If(c, then, orelse, pos)
        if self.at("@"):
            self.advance()
            label = self.ident().text
            self.expect(";")
            return LocMark(label, pos)
        name = self.ident().text
        self.expect("=")
        e = self.aexpr()
        self.expect(";")
        return Assign(name, e, pos)

    # arithmetic

    def aexpr(self) -> AExpr:
        e = self.term()
        while self.at("+") or self.at("-"):
            t = self.advance()
            e = BinOp(t.text, e, self.term(), (t.line, t.col))
        return e

    def term(self) -> AExpr:
        e = self.unary()
        while self.at("*"):
            t = self.advance()
            e = BinOp("*", e, self.unary(), (t.line, t.col))
        return e

    def unary(self) -> AExpr:
        t = self.tok
        if self.at("-"):
            self.advance()
            if self.tok.kind == "int":
                return Num(-int(self.advance().text), (t.line, t.col))
            return Neg(self.unary(), (t.line, t.col))
        if self.at("+"):
            self.advance()
            if self.tok.kind == "int":
                return Num(int(self.advance().text), (t.line, t.col))
            raise LangError("unary '+' only applies to integer literals", t.line, t.col)
        if t.kind == "int":
            self.advance()
            return Num(int(t.text), (t.line, t.col))
        if self.at("("):
            self.advance()
            e = self.aexpr()
            self.expect(")")
            return e
        return Var(self.ident().text, (t.line, t.col))

    # boolean

    def bexpr(self) -> BExpr:
        e = self.conjunction()
        while self.at("||"):
            t = self.advance()
            e = LBin("||", e, self.conjunction(), (t.line, t.col))
        return e

    def conjunction(self) -> BExpr:
        e = self.bunary()
        while self.at("&&"):
            t = self.advance()
            e = LBin("&&", e, self.bunary(), (t.line, t.col))
        return e

    def bunary(self) -> BExpr:
        t = self.tok
        if self.at("!"):
            self.advance()
            return LNot(self.bunary(), (t.line, t.col))
        if self.at("true") or self.at("false"):
            self.advance()
            return BoolLit(t.text == "true", (t.line, t.col))
        start = self.i
        try:
            left = self.aexpr()
            if self.tok.text in _CMP_OPS and self.tok.kind == "op":
                op = self.advance().text
                return Cmp(op, left, self.aexpr(), (t.line, t.col))
            raise _Backtrack
        except (LangError, _Backtrack) as err:
            self.i = start
            if not self.at("("):
                if isinstance(err, LangError):
                    raise
                raise LangError("expected a comparison", t.line, t.col) from None
        self.advance()
        e = self.bexpr()
        self.expect(")")
        return e


def parse(text: str) -> Program:
    """Parse and scope-check a program."""
    return Parser(text).program()


def parse_bexpr(text: str) -> BExpr:
    p = Parser(text)
    e = p.bexpr()
    if p.tok.kind != "eof":
        raise LangError(f"trailing input {p.tok.text!r}", p.tok.line, p.tok.col)
    return e


def parse_aexpr(text: str) -> AExpr:
    p = Parser(text)
    e = p.aexpr()
    if p.tok.kind != "eof":
        raise LangError(f"trailing input {p.tok.text!r}", p.tok.line, p.tok.col)
    return e


# printer ----------------------------------------------------------------------


def show_aexpr(e: AExpr, prec: int = 0) -> str:
    if isinstance(e, Num):
        s = str(e.value)
        return f"({s})" if e.value < 0 and prec > 0 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        inner = show_aexpr(e.arg, 3)
        if isinstance(e.arg, Num) and e.arg.value >= 0:
            inner = f"({inner})"
        s = "-" + inner
        return f"({s})" if prec > 2 else s
    p = 1 if e.op in "+-" else 2
    s = f"{show_aexpr(e.left, p)} {e.op} {show_aexpr(e.right, p + 1)}"
    return f"({s})" if p < prec else s


def show_bexpr(b: BExpr, prec: int = 0) -> str:
    if isinstance(b, BoolLit):
        return "true" if b.value else "false"
    if isinstance(b, Cmp):
        s = f"{show_aexpr(b.left)} {b.op} {show_aexpr(b.right)}"
        return f"({s})" if prec > 2 else s
    if isinstance(b, LNot):
        return "!" + show_bexpr(b.arg, 3)
    p = 0 if b.op == "||" else 1
    s = f"{show_bexpr(b.left, p)} {b.op} {show_bexpr(b.right, p + 1)}"
    return f"({s})" if p < prec else s


def pretty_print(p: Program) -> str:
    lines = [f"fn {p.name}({', '.join(f'{x}: int' for x in p.params)}) {{"]
    _show_block(p.body, 1, lines)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _show_block(stmts, depth, lines):
    pad = "  " * depth
    for s in stmts:
        if isinstance(s, Assume):
            lines.append(f"{pad}assume({show_bexpr(s.cond)});")
        elif isinstance(s, Decl):
            items = [n if e is None else f"{n} = {show_aexpr(e)}" for n, e in s.items]
            lines.append(f"{pad}int {', '.join(items)};")
        elif isinstance(s, Assign):
            lines.append(f"{pad}{s.name} = {show_aexpr(s.expr)};")
        elif isinstance(s, LocMark):
            lines.append(f"{pad}@{s.label};")
        elif isinstance(s, While):
            if s.head is not None:
                lines.append(f"{pad}@{s.head};")
            lines.append(f"{pad}while ({show_bexpr(s.cond)}) {{")
            _show_block(s.body, depth + 1, lines)
            lines.append(f"{pad}}}")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({show_bexpr(s.cond)}) {{")
            _show_block(s.then, depth + 1, lines)
            if s.orelse:
                lines.append(f"{pad}}} else {{")
                _show_block(s.orelse, depth + 1, lines)
            lines.append(f"{pad}}}")


# translation to polynomials / formulas --------------------------------------------


def to_poly(e: AExpr, lookup: Callable[[str], Poly]) -> Poly:
    if isinstance(e, Num):
        return Poly.const(e.value)
    if isinstance(e, Var):
        return lookup(e.name)
    if isinstance(e, Neg):
        return -to_poly(e.arg, lookup)
    l, r = to_poly(e.left, lookup), to_poly(e.right, lookup)
    return l + r if e.op == "+" else l - r if e.op == "-" else l * r


def to_formula(b: BExpr, lookup: Callable[[str], Poly]) -> Formula:
    if isinstance(b, BoolLit):
        return atom(0, "==" if b.value else "!=")
    if isinstance(b, Cmp):
        return atom(to_poly(b.left, lookup), b.op, to_poly(b.right, lookup))
    if isinstance(b, LNot):
        return neg(to_formula(b.arg, lookup))
    parts = [to_formula(b.left, lookup), to_formula(b.right, lookup)]
    return conj(parts) if b.op == "&&" else disj(parts)


def relation(text: str) -> Formula:
    """Parse a relation such as ``x == q*y + r`` into a formula over variable names."""
    return to_formula(parse_bexpr(text), Poly.var)


# interpreter -------------------------------------------------------------------


class _AssumeFailed(Exception):
    pass


class _OutOfFuel(Exception):
    pass


@dataclass
class Run:
    """Observed states of one execution at one location."""

    states: list
    truncated: bool = False


def _eval_a(e: AExpr, env: dict) -> int:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        v = env[e.name]
        if v is None:
            raise ExecError(f"read of unset variable {e.name!r}")
        return v
    if isinstance(e, Neg):
        return -_eval_a(e.arg, env)
    l, r = _eval_a(e.left, env), _eval_a(e.right, env)
    return l + r if e.op == "+" else l - r if e.op == "-" else l * r


def _eval_b(b: BExpr, env: dict) -> bool:
    if isinstance(b, BoolLit):
        return b.value
    if isinstance(b, Cmp):
        l, r = _eval_a(b.left, env), _eval_a(b.right, env)
        return {"==": l == r, "!=": l != r, "<": l < r, "<=": l <= r, ">": l > r, ">=": l >= r}[b.op]
    if isinstance(b, LNot):
        return not _eval_b(b.arg, env)
    if b.op == "&&":
        return _eval_b(b.left, env) and _eval_b(b.right, env)
    return _eval_b(b.left, env) or _eval_b(b.right, env)


def trace(p: Program, inputs, fuel: int = 100_000) -> tuple[list[ConcreteState], bool]:
    """Run ``p`` and return (states at every location in visit order, truncated)."""
    if len(inputs) != len(p.params):
        raise ValueError(f"{p.name} takes {len(p.params)} inputs, got {len(inputs)}")
    env: dict = dict(zip(p.params, (int(v) for v in inputs)))
    seen: list[ConcreteState] = []
    budget = [fuel]

    def tick():
        budget[0] -= 1
        if budget[0] < 0:
            raise _OutOfFuel

    def visit(label):
        seen.append(ConcreteState(label, tuple(env[v] for v in p.loc_vars[label])))

    def run(stmts):
        for s in stmts:
            tick()
            if isinstance(s, Assign):
                env[s.name] = _eval_a(s.expr, env)
            elif isinstance(s, Decl):
                for name, init in s.items:
                    env[name] = None if init is None else _eval_a(init, env)
            elif isinstance(s, While):
                while True:
                    if s.head is not None:
                        visit(s.head)
                    if not _eval_b(s.cond, env):
                        break
                    run(s.body)
                    tick()
            elif isinstance(s, If):
                run(s.then if _eval_b(s.cond, env) else s.orelse)
            elif isinstance(s, LocMark):
                visit(s.label)
            elif isinstance(s, Assume):
                if not _eval_b(s.cond, env):
                    raise _AssumeFailed

    try:
        run(p.body)
    except _AssumeFailed:
        return [], False
    except _OutOfFuel:
        return seen, True
    return seen, False


def interpret(p: Program, inputs, loc: str, fuel: int = 100_000) -> Run:
    """States observed at ``loc`` when running ``p`` on ``inputs``.

    A failed ``assume`` filters the whole execution (empty result).  Running out
    of ``fuel`` (statements executed) returns what was seen with ``truncated``.
    """
    p.vars_at(loc)
    seen, truncated = trace(p, inputs, fuel)
    return Run([s for s in seen if s.loc == loc], truncated)


def iter_stmts(stmts) -> Iterator[Stmt]:
    for s in stmts:
        yield s
        if isinstance(s, While):
            yield from iter_stmts(s.body)
        elif isinstance(s, If):
            yield from iter_stmts(s.then)
            yield from iter_stmts(s.orelse)
