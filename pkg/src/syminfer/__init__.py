"""Invariant inference for a small integer language using symbolic states."""

from pathlib import Path

__version__ = "0.1.0"

PROGRAMS = Path(__file__).parent / "programs"
