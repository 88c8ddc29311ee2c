"""Incremental update of a fixpointed analysis graph under a program delta.

Additive predicates (clauses only added) keep their nodes: each node gets the
new clauses queued and any growth propagates through the dependency arcs.
Destructive predicates (a clause deleted, or the predicate appearing or
disappearing) lose their nodes together with every node that transitively
read one of them; the solver then rebuilds the missing region from the
entries. Untouched nodes are reused as they are.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass

from .chc import ChcProgram, ProgramDelta, pred_str
from .engine import AnalysisGraph, CancelToken, Solver, entries_of, entry_keys, key_order

log = logging.getLogger(__name__)

ADDITIVE, DESTRUCTIVE, ASSERTION_ONLY, ENTRY_CHANGE = "additive", "destructive", "assertion_only", "entry_change"


class StaleGraph(Exception):
    """The graph was not computed for the delta's old program; analyze from scratch."""


@dataclass
class InvalidationReport:
    deleted_nodes: frozenset
    reused_nodes: int
    reanalysis_seeds: list
    reason: str
    recomputations: int = 0

    def to_json(self) -> dict:
        def key_text(k):
            return f"{pred_str(k[0])}:{k[1].hex() if k[1] is not None else 'bottom'}"

        return {
            "reason": self.reason,
            "deleted_nodes": sorted(key_text(k) for k in self.deleted_nodes),
            "reused_nodes": self.reused_nodes,
            "reanalysis_seeds": [key_text(k) for k in self.reanalysis_seeds],
            "recomputations": self.recomputations,
        }


def classify(delta: ProgramDelta) -> str:
    if delta.entry_changed:
        return ENTRY_CHANGE
    if delta.clause_delta_empty:
        return ASSERTION_ONLY
    if not delta.deleted_clauses:
        return ADDITIVE
    return DESTRUCTIVE


def _dependent_closure(graph: AnalysisGraph, start) -> set:
    doomed = set(start)
    todo = list(start)
    while todo:
        k = todo.pop()
        for src in graph.dependents.get(k, ()):
            if src[0] not in doomed:
                doomed.add(src[0])
                todo.append(src[0])
    return doomed


def apply_delta(graph: AnalysisGraph, new_program: ChcProgram, delta: ProgramDelta, domain: str | None = None,
                cancel: CancelToken | None = None, trace=None, in_place: bool = False):
    """Bring ``graph`` to the fixpoint of ``new_program``.

    Returns ``(graph', report)``. Unless ``in_place`` is set the input graph
    is left untouched, so a cancelled run loses nothing.
    """
    if graph.fingerprint != delta.old_fingerprint:
        raise StaleGraph("graph fingerprint does not match the delta's old program")
    if domain is not None and domain != graph.domain:
        raise StaleGraph(f"domain changed from {graph.domain} to {domain}")
    reason = classify(delta)
    if reason == ASSERTION_ONLY:
        out = copy.copy(graph)
        out.fingerprint = delta.new_fingerprint
        return out, InvalidationReport(frozenset(), len(graph.nodes), [], reason)

    g = graph if in_place else graph.copy()
    before = g.stats.recomputations
    destructive = {c.pred for c in delta.deleted_clauses} | set(delta.defined_changes)
    additive = [p for p in new_program.preds if p in delta.changed_preds and p not in destructive]

    start = set()
    for p in destructive:
        start.update(g.by_pred.get(p, ()))
        start.update(src[0] for src in g.unknown_users.get(p, ()))
    doomed = _dependent_closure(g, start)
    reused = len(g.nodes) - len(doomed)
    g.remove_nodes(doomed)

    added_by_pred: dict = {}
    for c in delta.added_clauses:
        added_by_pred.setdefault(c.pred, set()).add(c.clause_id)
    pending = []
    seeds = []
    for p in additive:
        new_ids = [c.clause_id for c in new_program.preds[p] if c.clause_id in added_by_pred.get(p, ())]
        for key in sorted(g.by_pred.get(p, ()), key=key_order):
            if key[1] is None:
                continue
            seeds.append(key)
            pending.extend((key, cid) for cid in new_ids)

    keys = entry_keys(entries_of(new_program, g.domain))
    seeds = [k for k in keys if k not in g.nodes] + seeds
    g.entry_keys = keys
    g.fingerprint = delta.new_fingerprint
    Solver(g, new_program, cancel, trace).run(keys, pending)
    g.collect_garbage()
    report = InvalidationReport(frozenset(doomed), reused, seeds, reason, g.stats.recomputations - before)
    log.debug("incremental %s: %d deleted, %d reused, %d recomputations", reason, len(doomed), reused,
              report.recomputations)
    return g, report
