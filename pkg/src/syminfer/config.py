"""Run configuration shared by the CLI, the benchmark harness and tests."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Optional

from .smt import DEFAULT_LOGIC, DEFAULT_SOLVER_CMD, SOLVER_ENV


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    program: str = ""
    locations: list = field(default_factory=list)  # empty means every marked location
    degree: int = 2
    oct_range: tuple = (-10, 10)
    start_depth: int = 10
    max_depth: int = 20
    solver_cmd: str = ""
    smt_timeout_ms: int = 5000
    solver_session: bool = False
    smt_logic: str = DEFAULT_LOGIC  # "none" leaves the logic undeclared
    log_smt: Optional[str] = None
    seed: int = 0
    runs: int = 11
    bootstrap: str = "symbolic"
    fuzz_range: tuple = (-300, 300)
    oversample: float = 1.5
    term_cap: int = 500
    budget_secs: float = 300.0
    counter: Optional[str] = None
    workers: int = 1
    octagons: bool = True
    include_timing: bool = False

    def __post_init__(self):
        if not self.solver_cmd:
            self.solver_cmd = os.environ.get(SOLVER_ENV) or DEFAULT_SOLVER_CMD
        self.oct_range = tuple(self.oct_range)
        self.fuzz_range = tuple(self.fuzz_range)
        self.locations = list(self.locations)

    def validate(self) -> "RunConfig":
        problems = []
        if not 1 <= self.degree <= 10:
            problems.append("degree must be in 1..10")
        if self.oct_range[0] > self.oct_range[1]:
            problems.append("oct range is empty")
        if not 0 <= self.start_depth <= self.max_depth <= 200:
            problems.append("need 0 <= start depth <= max depth <= 200")
        if self.smt_timeout_ms < 1:
            problems.append("solver timeout must be positive")
        if not self.smt_logic or not self.smt_logic.replace("_", "").isalnum():
            problems.append("smt logic must be a logic name or 'none'")
        if self.runs < 1:
            problems.append("runs must be >= 1")
        if self.bootstrap not in ("symbolic", "fuzz"):
            problems.append("bootstrap must be 'symbolic' or 'fuzz'")
        if self.fuzz_range[0] > self.fuzz_range[1]:
            problems.append("fuzz range is empty")
        if self.oversample < 1.0:
            problems.append("oversample must be >= 1")
        if self.term_cap < 1:
            problems.append("term cap must be positive")
        if self.budget_secs <= 0:
            problems.append("budget must be positive")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    @property
    def logic(self) -> Optional[str]:
        return None if self.smt_logic.lower() == "none" else self.smt_logic

    def make_solver(self):
        from .smt import Solver

        return Solver(self.solver_cmd, self.smt_timeout_ms, self.log_smt, self.solver_session, self.logic)

    def to_json(self) -> dict:
        d = asdict(self)
        d["oct_range"] = list(self.oct_range)
        d["fuzz_range"] = list(self.fuzz_range)
        # these do not influence results
        for k in ("log_smt", "include_timing", "runs", "workers"):
            d.pop(k)
        return d


def parse_range(text: str) -> tuple:
    """``"lo:hi"`` to ``(lo, hi)``."""
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"expected a range lo:hi, got {text!r}") from None
