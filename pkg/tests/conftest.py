import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from syminfer import PROGRAMS, lang  # noqa: E402
from syminfer.smt import Solver  # noqa: E402


def load(name: str) -> lang.Program:
    return lang.parse((PROGRAMS / f"{name}.mvl").read_text())


@pytest.fixture(scope="session")
def solver():
    s = Solver()
    yield s
    s.close()


@pytest.fixture(scope="session")
def fast_solver():
    s = Solver(session=True)
    yield s
    s.close()


@pytest.fixture(scope="session")
def idiv():
    return load("idiv")


def pytest_report_header(config):
    return f"solver: {shutil.which('z3') or 'z3 not on PATH'}"
