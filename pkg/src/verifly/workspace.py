"""One analysis pass over a set of files: parse, normalize, analyze, check.

:class:`Analyzer` keeps the last consistent (program, graph) pair, so the next
pass is incremental when the files changed but the domain did not. Both the
batch command and the daemon's worker thread drive it.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .chc import ChcProgram, build_program, diff, fingerprint, normalize_ast
from .checker import AssertionVerdict, assertion_problems, check_all
from .domains import DOMAINS, select_domain
from .engine import AnalysisGraph, CancelToken, analyze, entries_of
from .incremental import InvalidationReport, StaleGraph, apply_delta
from .snapshot import SnapshotError, dump, load_snapshot
from .spans import Diagnostic
from .syntax import SourceAst, parse_program

log = logging.getLogger(__name__)

DOMAIN_CHOICES = DOMAINS + ("auto",)


@dataclass
class Config:
    domains: str = "auto"
    prelude: bool = True
    debounce_ms: int = 300
    snapshot: str | None = None
    snapshot_format: str = "bin"

    def __post_init__(self) -> None:
        if self.domains not in DOMAIN_CHOICES:
            raise ValueError(f"unknown domain selection {self.domains!r}")
        if self.snapshot_format not in ("bin", "json"):
            raise ValueError(f"unknown snapshot format {self.snapshot_format!r}")
        if self.debounce_ms < 0:
            raise ValueError("debounce interval must be nonnegative")


@dataclass
class TimingStats:
    load_ms: float = 0.0
    analysis_ms: float = 0.0
    check_ms: float = 0.0
    incremental: bool = False
    nodes_reused: int = 0
    nodes_recomputed: int = 0

    def to_json(self) -> dict:
        return {
            "load_ms": round(self.load_ms, 3),
            "analysis_ms": round(self.analysis_ms, 3),
            "check_ms": round(self.check_ms, 3),
            "incremental": self.incremental,
            "nodes_reused": self.nodes_reused,
            "nodes_recomputed": self.nodes_recomputed,
        }


@dataclass
class AnalysisResult:
    generation: int
    diagnostics: list[Diagnostic]
    lines: list[str]
    verdicts: list[AssertionVerdict]
    stats: TimingStats
    program: ChcProgram
    graph: AnalysisGraph
    report: InvalidationReport | None = None
    syntax_errors: int = 0

    @property
    def has_false(self) -> bool:
        return any(v.status == "false" for v in self.verdicts)

    def diagnostics_json(self) -> list[dict]:
        return [d.to_json() for d in self.diagnostics]


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


@dataclass
class Analyzer:
    config: Config = field(default_factory=Config)
    trace_fixpoint: Callable[[str], None] | None = None
    trace_incremental: Callable[[str], None] | None = None
    program: ChcProgram | None = None
    graph: AnalysisGraph | None = None
    warm: AnalysisGraph | None = None
    _asts: dict = field(default_factory=dict)

    # -- snapshots
    def load_snapshot(self, path: str) -> bool:
        """Stage a saved graph for reuse by the next pass if its fingerprint matches."""
        try:
            with open(path, "rb") as fh:
                self.warm, _ = load_snapshot(fh.read())
        except FileNotFoundError:
            return False
        except (OSError, SnapshotError) as err:
            log.warning("ignoring snapshot %s: %s", path, err)
            return False
        return True

    def save_snapshot(self, path: str | None = None, fmt: str | None = None) -> None:
        path = path or self.config.snapshot
        if path is None or self.graph is None:
            return
        data = dump(self.graph, fmt or self.config.snapshot_format)
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)

    # -- passes
    def parse(self, path: str, text: str) -> tuple[SourceAst, list]:
        """Parsed and normalized file, cached while its text is unchanged."""
        hit = self._asts.get(path)
        if hit is not None and hit[0] == text:
            return hit[1], hit[2]
        ast = parse_program(text, path)
        clauses = normalize_ast(ast)
        self._asts[path] = (text, ast, clauses)
        return ast, clauses

    def run(self, files: Mapping[str, str], generation: int = 0, cancel: CancelToken | None = None) -> AnalysisResult:
        """Analyze and check ``files``; raises ``Cancelled`` leaving the previous state intact."""
        t0 = time.perf_counter()
        for stale in set(self._asts) - set(files):
            del self._asts[stale]
        parsed = [self.parse(p, files[p]) for p in sorted(files)]
        asts = [a for a, _ in parsed]
        program = build_program(asts, prelude=self.config.prelude, normalized=[c for _, c in parsed])
        load_ms = _ms(t0)

        domain = self.config.domains
        if domain == "auto":
            domain = select_domain(program.assertions)
        t0 = time.perf_counter()
        graph, stats, report = self._analyze(program, domain, cancel)
        stats.load_ms = load_ms
        stats.analysis_ms = _ms(t0)

        t0 = time.perf_counter()
        verdicts = check_all(graph, program)
        diags: list[Diagnostic] = []
        for ast in asts:
            diags.extend(ast.syntax_errors)
        diags.extend(program.diagnostics)
        entries_of(program, domain, diags)
        diags.extend(assertion_problems(program, domain)[1])
        diags.sort(key=Diagnostic.sort_key)
        # verdicts keep check_all's order (calls before success) within a span
        lines = [d.render() for d in diags]
        for v in verdicts:
            diags.append(v.to_diagnostic())
            lines.append(v.render())
        order = sorted(range(len(diags)), key=lambda i: diags[i].sort_key()[:5])
        diags = [diags[i] for i in order]
        lines = [lines[i] for i in order]
        stats.check_ms = _ms(t0)

        self.program, self.graph, self.warm = program, graph, None
        return AnalysisResult(
            generation, diags, lines, verdicts, stats, program, graph, report,
            sum(len(a.syntax_errors) for a in asts),
        )

    def _analyze(self, program: ChcProgram, domain: str, cancel: CancelToken | None):
        stats = TimingStats()
        trace = self.trace_fixpoint
        if self.graph is not None and self.program is not None and self.graph.domain == domain:
            delta = diff(self.program, program)
            try:
                graph, report = apply_delta(self.graph, program, delta, domain, cancel, trace)
            except StaleGraph as err:
                log.info("falling back to scratch analysis: %s", err)
            else:
                if self.trace_incremental is not None:
                    self.trace_incremental(json.dumps(report.to_json(), sort_keys=True))
                stats.incremental = True
                stats.nodes_reused = report.reused_nodes
                stats.nodes_recomputed = report.recomputations
                return graph, stats, report
        warm = self.warm
        if warm is not None and warm.domain == domain and warm.fingerprint == fingerprint(program):
            log.info("warm start from snapshot: %d nodes reused", len(warm.nodes))
            stats.incremental = True
            stats.nodes_reused = len(warm.nodes)
            return warm, stats, None
        graph = analyze(program, domain=domain, cancel=cancel, trace=trace)
        stats.nodes_recomputed = graph.stats.recomputations
        return graph, stats, None


def read_files(paths) -> dict:
    """Read source files; raises ``OSError`` naming the unreadable path."""
    out = {}
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            out[p] = fh.read()
    return out
