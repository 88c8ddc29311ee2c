"""Abstract-interpretation based assertion checking for logic programs, with an incremental daemon."""

from __future__ import annotations

from .chc import ChcProgram, ProgramDelta, build_program, diff, dump_chc, fingerprint
from .checker import AssertionVerdict, check_all, check_calls, check_success
from .domains import MODES, PRODUCT, TYPES, Subst
from .engine import AnalysisGraph, CancelToken, Cancelled, analyze, entries_of
from .incremental import InvalidationReport, StaleGraph, apply_delta, classify
from .kernel import BACKEND
from .snapshot import StaleSnapshot, load_snapshot, save_snapshot
from .syntax import SourceAst, parse_program
from .workspace import Analyzer, Config, TimingStats

__version__ = "0.1.0"

__all__ = [
    "AnalysisGraph", "Analyzer", "AssertionVerdict", "BACKEND", "CancelToken", "Cancelled", "ChcProgram",
    "Config", "InvalidationReport", "MODES", "PRODUCT", "ProgramDelta", "SourceAst", "StaleGraph",
    "StaleSnapshot", "Subst", "TYPES", "TimingStats", "analyze", "apply_delta", "build_program",
    "check_all", "check_calls", "check_success", "classify", "diff", "dump_chc", "entries_of",
    "fingerprint", "load_snapshot", "parse_program", "save_snapshot",
]
