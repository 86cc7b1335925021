"""SMT-LIB v2 client for nonlinear integer arithmetic.

Queries are written as plain SMT-LIB text (logic ``QF_NIA``) and piped to an
external solver process (``z3 -in`` unless configured otherwise).  By default
every query runs in a fresh process.  ``session=True`` keeps a small pool of
long-lived processes and isolates queries with ``push``/``pop`` instead.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import os
import queue
import re
import select
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .logic import FALSE, TRUE, And, Atom, Formula, Not, Or, Poly, _natural_key, atom, conj, disj, free_vars, neg, to_smt

log = logging.getLogger(__name__)

DEFAULT_SOLVER_CMD = "z3 -in"
DEFAULT_LOGIC = "QF_NIA"
SOLVER_ENV = "SYMINFER_SOLVER"


class SolverError(Exception):
    """The solver replied with something we cannot interpret."""


@dataclass(frozen=True)
class Verdict:
    status: str  # "sat" | "unsat" | "unknown"
    model: Optional[dict] = None  # symbol -> int, total over declared symbols when sat
    reason: Optional[str] = None  # "timeout" | "incomplete" for unknown
    transcript: str = ""  # content hash of the query script

    @property
    def sat(self) -> bool:
        return self.status == "sat"

    @property
    def unsat(self) -> bool:
        return self.status == "unsat"


# s-expressions ----------------------------------------------------------------

_SEXP_TOKEN = re.compile(r'\s*(?:(\()|(\))|("(?:[^"]|"")*")|(\|[^|]*\|)|([^\s()|"]+))')


def parse_sexps(text: str) -> list:
    """Parse a sequence of s-expressions into nested lists of strings."""
    stack: list[list] = [[]]
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _SEXP_TOKEN.match(text, pos)
        if not m:
            raise SolverError(f"cannot parse solver output near {text[pos:pos + 40]!r}")
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(2):
            if len(stack) == 1:
                raise SolverError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        elif m.group(4):
            stack[-1].append(m.group(4)[1:-1])
        else:
            stack[-1].append(m.group(3) or m.group(5))
    if len(stack) != 1:
        raise SolverError("unbalanced '(' in solver output")
    return stack[0]


def _int_value(v) -> int:
    if isinstance(v, str):
        return int(v)
    if len(v) == 2 and v[0] == "-":
        return -_int_value(v[1])
    raise SolverError(f"unexpected model value {v!r}")


def _poly_from_sexp(e) -> Poly:
    if isinstance(e, str):
        return Poly.const(int(e)) if re.fullmatch(r"\d+", e) else Poly.var(e)
    head, args = e[0], [_poly_from_sexp(a) for a in e[1:]]
    if head == "+":
        return sum(args, Poly())
    if head == "*":
        out = Poly.const(1)
        for a in args:
            out = out * a
        return out
    if head == "-":
        return -args[0] if len(args) == 1 else args[0] - sum(args[1:], Poly())
    raise SolverError(f"unsupported term {e!r}")


_OPS = {"=": "==", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def formula_from_sexp(e) -> Formula:
    """Inverse of :func:`logic.to_smt` (exact, including polynomial normal form)."""
    if e == "true":
        return TRUE
    if e == "false":
        return FALSE
    head = e[0]
    if head in _OPS:
        return Atom(_poly_from_sexp(e[1]) - _poly_from_sexp(e[2]), _OPS[head])
    if head == "not":
        inner = formula_from_sexp(e[1])
        if isinstance(inner, Atom) and inner.op == "==":
            return Atom(inner.poly, "!=")
        return Not(inner)
    if head == "and":
        return And(tuple(formula_from_sexp(a) for a in e[1:]))
    if head == "or":
        return Or(tuple(formula_from_sexp(a) for a in e[1:]))
    raise SolverError(f"unsupported formula {e!r}")


def formula_from_smt(text: str) -> Formula:
    (e,) = parse_sexps(text)
    return formula_from_sexp(e)


# scripts ----------------------------------------------------------------------


def script(f: Formula, symbols: Iterable[str], timeout_ms: Optional[int] = None, logic: Optional[str] = DEFAULT_LOGIC) -> str:
    """SMT-LIB script checking ``f``; asks for values of ``symbols`` afterwards.

    ``logic=None`` leaves the logic undeclared (z3 then picks its own strategy).
    """
    syms = list(symbols)
    lines = ["(set-option :produce-models true)"] + ([f"(set-logic {logic})"] if logic else [])
    lines += [f"(declare-fun {s} () Int)" for s in syms]
    lines.append(f"(assert {to_smt(f)})")
    lines.append("(check-sat)")
    if syms:
        lines.append(f"(get-value ({' '.join(syms)}))")
    return "\n".join(lines) + "\n"


def ordered_symbols(f: Formula, extra: Iterable[str] = ()) -> list[str]:
    return sorted(free_vars(f) | set(extra), key=_natural_key)


def _interpret_reply(text: str, symbols: list[str], digest: str) -> Verdict:
    items = parse_sexps(text)
    if not items:
        raise SolverError("empty solver reply")
    head = items[0]
    if head == "unsat":
        return Verdict("unsat", transcript=digest)
    if head == "unknown":
        return Verdict("unknown", reason="incomplete", transcript=digest)
    if head != "sat":
        raise SolverError(f"unexpected solver reply {text[:200]!r}")
    model: dict = {}
    for item in items[1:]:
        if isinstance(item, list) and item and item[0] == "error":
            raise SolverError(f"solver error: {item}")
        if isinstance(item, list):
            for pair in item:
                model[pair[0]] = _int_value(pair[1])
    missing = [s for s in symbols if s not in model]
    if missing:
        raise SolverError(f"model lacks values for {missing}")
    return Verdict("sat", model, transcript=digest)


class _Session:
    """A long-lived solver process answering push/pop-isolated queries."""

    MARKER = "syminfer-done"

    def __init__(self, argv: list[str], logic: Optional[str] = DEFAULT_LOGIC):
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, bufsize=0
        )
        self._buf = b""
        head = "(set-option :print-success false)\n(set-option :produce-models true)\n"
        self._send(head + (f"(set-logic {logic})\n" if logic else ""))

    def _send(self, text: str) -> None:
        self.proc.stdin.write(text.encode())
        self.proc.stdin.flush()

    def query(self, body: str, timeout_s: float) -> Optional[str]:
        """Run ``body`` between push and pop; None on timeout."""
        self._send(f"(push 1)\n{body}(pop 1)\n(echo \"{self.MARKER}\")\n")
        deadline = time.monotonic() + timeout_s
        fd = self.proc.stdout.fileno()
        while True:
            m = re.search(rb'^"?%s"?\r?$' % self.MARKER.encode(), self._buf, re.M)
            if m:
                out, self._buf = self._buf[: m.start()], self._buf[m.end():].lstrip(b"\r\n")
                return out.decode()
            left = deadline - time.monotonic()
            if left <= 0 or not select.select([fd], [], [], left)[0]:
                return None
            chunk = os.read(fd, 65536)
            if not chunk:
                raise SolverError("solver session terminated")
            self._buf += chunk

    def close(self) -> None:
        try:
            self.proc.kill()
            self.proc.wait(timeout=1)
        except Exception:
            pass


class Solver:
    """Runs SMT queries; safe to share between threads."""

    def __init__(
        self,
        cmd: str | None = None,
        timeout_ms: int = 5000,
        log_dir: str | os.PathLike | None = None,
        session: bool = False,
        logic: Optional[str] = DEFAULT_LOGIC,
    ):
        self.cmd = cmd or os.environ.get(SOLVER_ENV) or DEFAULT_SOLVER_CMD
        self.argv = shlex.split(self.cmd)
        self.timeout_ms = timeout_ms
        self.log_dir = Path(log_dir) if log_dir else None
        if self.log_dir:
            self.log_dir.mkdir(parents=True, exist_ok=True)
        self.use_sessions = session
        self.logic = logic or None
        self._pool: "queue.SimpleQueue[_Session]" = queue.SimpleQueue()
        self._all_sessions: list[_Session] = []
        self._lock = threading.Lock()
        self._seq = itertools.count(1)
        self.queries = 0
        self.seconds = 0.0
        self._cache: dict[str, Verdict] = {}

    # core -------------------------------------------------------------------

    def check_sat(self, f: Formula, symbols: Iterable[str] | None = None, timeout_ms: int | None = None) -> Verdict:
        """Decide ``f``; a sat verdict carries values for every symbol in ``f`` (and ``symbols``)."""
        syms = ordered_symbols(f, symbols or ())
        text = script(f, syms, logic=self.logic)
        digest = hashlib.sha1(text.encode()).hexdigest()[:12]
        with self._lock:
            hit = self._cache.get(text)
        if hit is not None:
            return hit
        timeout = (timeout_ms or self.timeout_ms) / 1000.0
        start = time.perf_counter()
        verdict = self._run(text, syms, digest, timeout)
        with self._lock:
            self.queries += 1
            self.seconds += time.perf_counter() - start
            seq = next(self._seq)
            if verdict.status != "unknown" or verdict.reason != "timeout":
                self._cache[text] = verdict
        if self.log_dir:
            (self.log_dir / f"{seq:06d}_{digest}.smt2").write_text(
                text + f"; verdict: {verdict.status}" + (f" ({verdict.reason})" if verdict.reason else "") + "\n"
            )
        return verdict

    def _run(self, text: str, syms: list[str], digest: str, timeout: float) -> Verdict:
        if self.use_sessions:
            return self._run_session(text, syms, digest, timeout)
        try:
            proc = subprocess.run(self.argv, input=text, capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            return Verdict("unknown", reason="timeout", transcript=digest)
        except OSError as err:
            log.error("cannot start solver %r: %s", self.cmd, err)
            return Verdict("unknown", reason="incomplete", transcript=digest)
        out = proc.stdout
        if not out.strip():
            log.warning("solver produced no output (exit %s): %s", proc.returncode, proc.stderr.strip()[:200])
            return Verdict("unknown", reason="incomplete", transcript=digest)
        return _interpret_reply(out, syms, digest)

    def _run_session(self, text: str, syms: list[str], digest: str, timeout: float) -> Verdict:
        body = "".join(
            line + "\n" for line in text.splitlines() if not line.startswith(("(set-option", "(set-logic"))
        )
        try:
            sess = self._pool.get_nowait()
        except queue.Empty:
            sess = _Session(self.argv, self.logic)
            with self._lock:
                self._all_sessions.append(sess)
        try:
            out = sess.query(body, timeout)
        except (SolverError, OSError, BrokenPipeError) as err:
            log.warning("solver session failed: %s", err)
            sess.close()
            return Verdict("unknown", reason="incomplete", transcript=digest)
        if out is None:
            sess.close()
            return Verdict("unknown", reason="timeout", transcript=digest)
        self._pool.put(sess)
        # drop the get-value error z3 prints after unsat/unknown
        return _interpret_reply(out, syms, digest)

    def close(self) -> None:
        for s in self._all_sessions:
            s.close()
        self._all_sessions.clear()

    # conveniences -----------------------------------------------------------------

    def check_implication(self, lhs: Formula, rhs: Formula, timeout_ms: int | None = None,
                          symbols: Iterable[str] | None = None) -> Verdict:
        """``check_sat(lhs and not rhs)``: unsat means ``lhs => rhs`` is valid."""
        return self.check_sat(conj([lhs, neg(rhs)]), symbols, timeout_ms)

    def feasibility(self, constraints: list) -> str:
        return self.check_sat(conj(constraints)).status


def encode_state(state, names) -> Formula:
    """Path condition plus ``var == value`` for every defined variable."""
    eqs = [atom(Poly.var(n), "==", e) for n, e in zip(names, state.env) if e is not None]
    return conj([c.formula for c in state.pc] + eqs)


def encode_states(states, names) -> Formula:
    return disj(encode_state(s, names) for s in states)


def point(values: Mapping[str, int]) -> Formula:
    """``name == value`` for each entry (used for blocking clauses)."""
    return conj(atom(Poly.var(n), "==", v) for n, v in values.items() if v is not None)
