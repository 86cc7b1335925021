"""Command-line driver: ``syminfer run`` and ``syminfer bench``."""

from __future__ import annotations

import argparse
import json
import logging
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import __version__, bounds, infer, lang
from .cegir import Candidate, Engine
from .config import ConfigError, RunConfig, parse_range
from .logic import conj, show
from .smt import Solver
from .symexec import program_hash

log = logging.getLogger("syminfer")

SCHEMA = "syminfer-report/1"


class UsageError(Exception):
    pass


# single program ----------------------------------------------------------------


def _describe(c: Candidate) -> dict:
    return {"invariant": str(c), "verified_depth": c.depth, "transcript": c.transcript}


def counter_bounds(eng: Engine, loc: str, eqs: list, states: list, counter: str) -> dict:
    """Roots of the counter in every proved equality over the counter and the inputs."""
    names = eng.p.vars_at(loc)
    inputs = [v for v in names if v in eng.p.params]
    keep = set(inputs) | {counter}
    if not eqs:
        return {"counter": counter, "solutions": [], "note": "no equalities"}
    terms = eqs[0].terms
    # eliminate every monomial that mentions a non-input variable first
    other = [i for i, e in enumerate(terms.exps) if any(k and n not in keep for n, k in zip(terms.names, e))]
    rest = [i for i in range(len(terms)) if i not in set(other)]
    basis = infer.reduce_basis(eqs, other + rest)
    envs = [dict(zip(names, v)) for v in states]
    out = []
    for b in basis:
        p = b.poly()
        if not p.variables() <= keep or counter not in p.variables():
            continue
        sol = bounds.solve_counter(p, counter, seed=eng.seed)
        bounds.attach_guards(sol, envs, inputs)
        out.append({
            "equality": str(b),
            "roots": [str(r.value) for r in sol.roots],
            "guards": [None if r.guard is None else show(r.guard) for r in sol.roots],
            "guard_notes": [r.note for r in sol.roots],
            "residual": None if sol.residual is None else str(sol.residual),
            "ambiguity": sol.guard_note or None,
        })
    return {"counter": counter, "solutions": out, "guards": "heuristic"}


def run_program(p: lang.Program, cfg: RunConfig, solver: Solver | None = None) -> dict:
    """Full pipeline on every requested location; returns the report dictionary."""
    own = solver is None
    solver = solver or cfg.make_solver()
    started = time.perf_counter()
    q0, s0 = solver.queries, solver.seconds
    eng = Engine(
        p, solver, cfg.start_depth, cfg.max_depth, cfg.seed, cfg.bootstrap, cfg.fuzz_range,
        cfg.oversample, cfg.term_cap, cfg.workers, cfg.budget_secs,
    )
    locs = cfg.locations or list(p.locations)
    for loc in locs:
        if loc not in p.locations:
            raise UsageError(f"{p.name} has no location {loc!r}")
    report = {
        "schema": SCHEMA,
        "tool_version": __version__,
        "program": p.name,
        "program_hash": program_hash(p),
        "config": cfg.to_json(),
        "locations": {},
        "timed_out": False,
    }
    try:
        for loc in locs:
            report["locations"][loc] = _run_location(eng, loc, cfg)
            report["timed_out"] |= report["locations"][loc]["timed_out"]
    finally:
        if own:
            solver.close()
    if cfg.include_timing:
        report["timing"] = {
            "total_secs": round(time.perf_counter() - started, 3),
            "symexec_secs": round(eng.symexec_seconds, 3),
            "solver_secs": round(solver.seconds - s0, 3),
            "solver_queries": solver.queries - q0,
        }
    return report


def _run_location(eng: Engine, loc: str, cfg: RunConfig) -> dict:
    names = eng.p.vars_at(loc)
    warnings: list[str] = []
    entry = {
        "variables": list(names),
        "degree": cfg.degree,
        "terms": 0,
        "discovered_degree": 0,
        "equalities": [],
        "inequalities": [],
        "refuted": 0,
        "unknown": 0,
        "iterations": 0,
        "bootstrap_states": 0,
        "candidates_before_redundancy": 0,
        "complexity": None,
        "warnings": warnings,
        "timed_out": False,
    }
    if not names:
        return entry
    eqs: list[Candidate] = []
    states: list = []
    try:
        res = eng.cegir_eqts(loc, cfg.degree)
    except infer.TooManyTerms as err:
        warnings.append(str(err))
        res = None
    if res is not None:
        eqs = res.invariants
        states = res.states
        entry.update(
            terms=len(res.terms) if res.terms else 0, refuted=res.refuted, unknown=res.unknown,
            iterations=res.iterations, bootstrap_states=res.bootstrap,
        )
        warnings.extend(res.warnings)
        entry["timed_out"] |= res.timed_out
    if not states:
        sample = eng.bootstrap_states(loc, 2 * len(names) + 1)
        states = [v for v in sample.states if None not in v]
    ineqs: list[Candidate] = []
    if cfg.octagons and not eng.expired():
        lo, hi = cfg.oct_range
        ineqs = eng.octagons(loc, lo, hi, states)
    if eng.expired():
        entry["timed_out"] = True
        warnings.append(f"budget of {cfg.budget_secs:g} s exhausted; results are partial")
    found = eqs + ineqs
    entry["candidates_before_redundancy"] = len(found)
    kept = eng.remove_redundant(found)
    entry["equalities"] = [_describe(c) for c in kept if c.kind == "eq"]
    entry["inequalities"] = [_describe(c) for c in kept if c.kind == "ineq"]
    entry["discovered_degree"] = max((c.prop.poly().degree() for c in kept if c.kind == "eq"), default=0)
    if cfg.max_depth in {c.depth for c in kept}:
        warnings.append("some invariants were only checked at the depth ceiling")
    if cfg.counter and cfg.counter in names:
        entry["complexity"] = counter_bounds(eng, loc, [c.prop for c in eqs], states, cfg.counter)
    return entry


def found_formula(report: dict, loc: str):
    """Conjunction of the reported invariants at ``loc``."""
    entry = report["locations"][loc]
    rels = [e["invariant"] for e in entry["equalities"] + entry["inequalities"]]
    return conj(lang.relation(r) for r in rels)


# expected-invariant sidecars ------------------------------------------------------


def read_expected(path: Path, p: lang.Program) -> tuple[dict, dict]:
    """Parse a sidecar: ``#!`` option lines, ``@loc`` headers and one relation per line.

    Returns (options, {loc: [relation text, ...]}).
    """
    opts: dict = {}
    rels: dict = {}
    loc = p.locations[0] if len(p.locations) == 1 else None
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if line.startswith("#!"):
            for item in line[2:].split():
                key, _, val = item.partition("=")
                opts[key.strip()] = val.strip()
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            loc = line[1:].strip()
            if loc not in p.locations:
                raise UsageError(f"{path}:{n}: unknown location {loc!r}")
            continue
        if loc is None:
            raise UsageError(f"{path}:{n}: relation before any @location header")
        try:
            lang.relation(line)
        except lang.LangError as err:
            raise UsageError(f"{path}:{n}: {err}") from None
        rels.setdefault(loc, []).append(line)
    return opts, rels


def _apply_options(cfg: RunConfig, opts: dict) -> RunConfig:
    out = replace(cfg)
    for k, v in opts.items():
        if k == "degree":
            out.degree = int(v)
        elif k == "counter":
            out.counter = v
        elif k == "start_depth":
            out.start_depth = int(v)
        elif k == "max_depth":
            out.max_depth = int(v)
        elif k == "oct_range":
            out.oct_range = parse_range(v)
        else:
            raise UsageError(f"unknown sidecar option {k!r}")
    return out.validate()


def check_expected(report: dict, expected: dict, solver: Solver) -> list[dict]:
    """One record per expected relation: implied by the found invariants or not."""
    out = []
    for loc, rels in expected.items():
        found = found_formula(report, loc) if loc in report["locations"] else None
        for text in rels:
            if found is None:
                out.append({"loc": loc, "expected": text, "ok": False, "verdict": "not analysed"})
                continue
            v = solver.check_implication(found, lang.relation(text))
            out.append({"loc": loc, "expected": text, "ok": v.unsat, "verdict": v.status, "transcript": v.transcript})
    return out


# suite -------------------------------------------------------------------------------


def bench_program(path: Path, cfg: RunConfig) -> dict:
    p = lang.parse(path.read_text())
    side = path.with_suffix(".expected")
    opts, expected = read_expected(side, p) if side.exists() else ({}, {})
    pcfg = _apply_options(replace(cfg, program=str(path)), opts)
    times = []
    report = None
    error = None
    solver = pcfg.make_solver()
    try:
        for _ in range(pcfg.runs):
            t0 = time.perf_counter()
            report = run_program(p, pcfg)
            times.append(time.perf_counter() - t0)
            if report["timed_out"]:
                break
        checks = check_expected(report, expected, solver)
    except Exception as err:  # one broken entry must not stop the suite
        log.exception("benchmark %s failed", path.name)
        error = f"{type(err).__name__}: {err}"
        checks = []
    finally:
        solver.close()
    locs = report["locations"] if report else {}
    n_vars = max((len(e["variables"]) for e in locs.values()), default=0)
    n_terms = max((e["terms"] for e in locs.values()), default=0)
    row = {
        "program": p.name,
        "locations": len(locs),
        "V": n_vars,
        "T": n_terms,
        "D": pcfg.degree,
        "discovered_degree": max((e["discovered_degree"] for e in locs.values()), default=0),
        "invariants": sum(len(e["equalities"]) + len(e["inequalities"]) for e in locs.values()),
        "median_secs": round(statistics.median(times), 2) if times else None,
        "runs": len(times),
        "checks": checks,
        "correct": error is None and bool(checks) and all(c["ok"] for c in checks)
        and not (report and report["timed_out"]),
        "reason": error or ("timed out" if report and report["timed_out"] else None),
    }
    for c in checks:
        if not c["ok"]:
            log.warning("%s@%s: expected %s not implied (%s)", p.name, c["loc"], c["expected"], c["verdict"])
    return row


def bench(suite: Path, cfg: RunConfig, jobs: int = 1) -> dict:
    files = sorted(suite.glob("*.mvl"))
    if not files:
        raise UsageError(f"no .mvl files in {suite}")
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(lambda f: bench_program(f, cfg), files))
    else:
        rows = [bench_program(f, cfg) for f in files]
    return {"schema": SCHEMA, "tool_version": __version__, "config": cfg.to_json(), "programs": rows}


def format_table(summary: dict) -> str:
    head = f"{'program':<14} {'locs':>4} {'V,T,D':>10} {'invs':>5} {'time(s)':>8}  ok"
    lines = [head, "-" * len(head)]
    for r in summary["programs"]:
        vtd = f"{r['V']},{r['T']},{r['D']}"
        t = "-" if r["median_secs"] is None else f"{r['median_secs']:.2f}"
        mark = "✓" if r["correct"] else "✗" + (f" ({r['reason']})" if r["reason"] else "")
        lines.append(f"{r['program']:<14} {r['locations']:>4} {vtd:>10} {r['invariants']:>5} {t:>8}  {mark}")
    return "\n".join(lines)


def format_report(report: dict) -> str:
    lines = [f"{report['program']}"]
    for loc, e in report["locations"].items():
        lines.append(f"  @{loc} ({', '.join(e['variables'])})")
        for inv in e["equalities"] + e["inequalities"]:
            lines.append(f"    {inv['invariant']}")
        cx = e.get("complexity")
        if cx:
            for s in cx["solutions"]:
                roots = ", ".join(f"{cx['counter']} = {r}" for r in s["roots"])
                lines.append(f"    bounds: {roots}" + (" (+ residual)" if s["residual"] else ""))
        for w in e["warnings"]:
            lines.append(f"    warning: {w}")
    if report["timed_out"]:
        lines.append("  (budget exhausted: partial results)")
    return "\n".join(lines)


# argument parsing -----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(ap: argparse.ArgumentParser) -> None:
    d = RunConfig()
    ap.add_argument("--degree", type=int, default=d.degree)
    ap.add_argument("--oct-range", default=f"{d.oct_range[0]}:{d.oct_range[1]}", metavar="LO:HI")
    ap.add_argument("--no-octagons", action="store_true", help="skip inequality inference")
    ap.add_argument("--start-depth", type=int, default=d.start_depth)
    ap.add_argument("--max-depth", type=int, default=d.max_depth)
    ap.add_argument("--budget-secs", type=float, default=d.budget_secs)
    ap.add_argument("--solver-cmd", default=None, help="solver command line (default: $SYMINFER_SOLVER or 'z3 -in')")
    ap.add_argument("--smt-timeout-ms", type=int, default=d.smt_timeout_ms)
    ap.add_argument("--solver-session", action="store_true", help="reuse solver processes with push/pop")
    ap.add_argument("--smt-logic", default=d.smt_logic, help="declared SMT logic, or 'none' to let the solver choose")
    ap.add_argument("--log-smt", default=None, metavar="DIR", help="write every query to DIR")
    ap.add_argument("--bootstrap", choices=("symbolic", "fuzz"), default=d.bootstrap)
    ap.add_argument("--fuzz-range", default=f"{d.fuzz_range[0]}:{d.fuzz_range[1]}", metavar="LO:HI")
    ap.add_argument("--oversample", type=float, default=d.oversample)
    ap.add_argument("--term-cap", type=int, default=d.term_cap)
    ap.add_argument("--seed", type=int, default=d.seed)
    ap.add_argument("--counter", default=None, help="loop-counter variable for complexity bounds")
    ap.add_argument("--workers", type=int, default=d.workers, help="concurrent verify calls")
    ap.add_argument("--include-timing", action="store_true", help="add wall-clock timings to the JSON report")
    ap.add_argument("--out", default=None, help="write the JSON report here")
    ap.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="syminfer", description="Infer polynomial and octagonal invariants of .mvl programs.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="analyse one program")
    r.add_argument("file")
    r.add_argument("--loc", action="append", default=[], help="location to analyse (repeatable; default all)")
    _common(r)
    b = sub.add_parser("bench", help="run a directory of programs with .expected sidecars")
    b.add_argument("dir")
    b.add_argument("--runs", type=int, default=RunConfig().runs)
    b.add_argument("--jobs", type=int, default=1, help="programs analysed concurrently")
    _common(b)
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        program=getattr(args, "file", "") or "",
        locations=getattr(args, "loc", []) or [],
        degree=args.degree,
        oct_range=parse_range(args.oct_range),
        start_depth=args.start_depth,
        max_depth=args.max_depth,
        solver_cmd=args.solver_cmd or "",
        smt_timeout_ms=args.smt_timeout_ms,
        solver_session=args.solver_session,
        smt_logic=args.smt_logic,
        log_smt=args.log_smt,
        seed=args.seed,
        runs=getattr(args, "runs", 1),
        bootstrap=args.bootstrap,
        fuzz_range=parse_range(args.fuzz_range),
        oversample=args.oversample,
        term_cap=args.term_cap,
        budget_secs=args.budget_secs,
        counter=args.counter,
        workers=args.workers,
        octagons=not args.no_octagons,
        include_timing=args.include_timing,
    )
    return cfg.validate()


def dumps(doc: dict) -> str:
    """The exact text written by ``--out``."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(doc: dict, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(dumps(doc))


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = config_from_args(args)
        if args.cmd == "run":
            try:
                p = lang.parse(Path(args.file).read_text())
            except OSError as err:
                raise UsageError(str(err)) from None
            report = run_program(p, cfg)
            _write(report, args.out)
            print(format_report(report))
        else:
            suite = Path(args.dir)
            if not suite.is_dir():
                raise UsageError(f"{suite} is not a directory")
            summary = bench(suite, cfg, args.jobs)
            _write(summary, args.out)
            print(format_table(summary))
    except (UsageError, ConfigError, lang.LangError) as err:
        print(f"syminfer: {err}", file=sys.stderr)
        return 1
    except Exception:
        log.exception("internal error")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
