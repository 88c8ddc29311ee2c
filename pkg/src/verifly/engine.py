"""Goal-dependent, multivariant fixpoint over the CHC program.

The analysis graph has one node per (predicate, abstract call pattern). A
node's success pattern is the lub of its clauses' exits. Arcs record which
body call of which clause read which node, and drive re-evaluation when a
callee's success grows.

When a body call needs a node that does not exist yet, that node is created
and evaluated on the spot (depth first); a call to a node still being
evaluated reads its current, possibly partial, success. Growth is handled by
a FIFO worklist of (node, clause) pairs. Clause evaluation is written as a
generator so the depth-first descent uses an explicit stack instead of
Python recursion.

After the worklist drains, nodes no longer reachable from the entries (call
patterns seen only under intermediate, since-grown successes) are dropped.
That makes the resulting graph a function of the program, entries and domain
alone, independent of scheduling.
"""

from __future__ import annotations

import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from . import kernel
from .chc import CALL, EQS, ChcProgram, fingerprint, pred_str, root_preds
from .domains import FLAGS, TOP_BYTE, Subst, abstract_props, render_pattern, select_domain
from .spans import Diagnostic
from .syntax import functor_of

log = logging.getLogger(__name__)

IN_PROGRESS, FIXPOINTED = "in_progress", "fixpointed"


class Cancelled(Exception):
    """Raised from inside a run when its cancellation token is set."""


class CancelToken:
    def __init__(self) -> None:
        self._event = threading.Event()

    def cancel(self) -> None:
        self._event.set()

    def is_set(self) -> bool:
        return self._event.is_set()


@dataclass
class AnalysisNode:
    key: tuple
    success: bytes | None = None
    state: str = IN_PROGRESS


@dataclass
class Stats:
    nodes_created: int = 0
    recomputations: int = 0
    body_steps: int = 0


@dataclass(frozen=True)
class DepArc:
    source: tuple  # (node key, clause id, body position)
    target: tuple


def key_order(key: tuple) -> tuple:
    (name, arity), call = key
    return (name, arity, call is not None, call or b"")


def _source_order(src: tuple) -> tuple:
    return key_order(src[0]) + src[1]


class AnalysisGraph:
    def __init__(self, domain: str, fingerprint: int = 0) -> None:
        self.domain = domain
        self.fingerprint = fingerprint
        self.nodes: dict = {}
        self.entry_keys: list = []
        # (node key, clause id) -> {body position: callee key}
        self.arcs: dict = {}
        # (node key, clause id) -> {undefined pred: None}
        self.unknown: dict = {}
        self.dependents: dict = {}
        self.unknown_users: dict = {}
        self.by_pred: dict = {}
        self.stats = Stats()

    # -- queries
    def nodes_of(self, pred) -> list:
        return [self.nodes[k] for k in self.by_pred.get(pred, ())]

    def dep_arcs(self) -> list[DepArc]:
        out = []
        for (key, cid), targets in self.arcs.items():
            for pos, target in targets.items():
                out.append(DepArc((key, cid, pos), target))
        return out

    def structure(self) -> tuple:
        nodes = tuple(sorted(((k, n.success) for k, n in self.nodes.items()), key=lambda kv: key_order(kv[0])))
        arcs = tuple(
            sorted(
                ((src[0], src[1], pos, tgt) for src, ts in self.arcs.items() for pos, tgt in ts.items()),
                key=lambda a: _source_order(a[:2]) + (a[2],),
            )
        )
        unknown = tuple(
            sorted(((src[0], src[1], tuple(sorted(ps))) for src, ps in self.unknown.items()), key=lambda u: _source_order(u[:2]))
        )
        return (self.domain, tuple(self.entry_keys), nodes, arcs, unknown)

    def same_as(self, other: AnalysisGraph) -> bool:
        return self.structure() == other.structure()

    def call_subst(self, key: tuple, names=None) -> Subst:
        pred, call = key
        names = tuple(names) if names is not None else tuple(f"v{i + 1}" for i in range(pred[1]))
        return Subst(self.domain, names, call)

    def success_subst(self, key: tuple, names=None) -> Subst:
        pred = key[0]
        names = tuple(names) if names is not None else tuple(f"v{i + 1}" for i in range(pred[1]))
        return Subst(self.domain, names, self.nodes[key].success)

    # -- mutation helpers (used by the solver and the incremental module)
    def add_node(self, key: tuple) -> AnalysisNode:
        node = AnalysisNode(key)
        self.nodes[key] = node
        self.by_pred.setdefault(key[0], {})[key] = None
        self.stats.nodes_created += 1
        return node

    def clear_source(self, src: tuple) -> None:
        targets = self.arcs.pop(src, None)
        if targets:
            for tgt in targets.values():
                deps = self.dependents.get(tgt)
                if deps is not None:
                    deps.pop(src, None)
        preds = self.unknown.pop(src, None)
        if preds:
            for p in preds:
                users = self.unknown_users.get(p)
                if users is not None:
                    users.pop(src, None)

    def add_arc(self, src: tuple, pos: int, target: tuple) -> None:
        self.arcs.setdefault(src, {})[pos] = target
        self.dependents.setdefault(target, {})[src] = None

    def add_unknown(self, src: tuple, pred) -> None:
        self.unknown.setdefault(src, {})[pred] = None
        self.unknown_users.setdefault(pred, {})[src] = None

    def remove_nodes(self, keys) -> None:
        keys = set(keys)
        for src in [s for s in self.arcs if s[0] in keys] + [s for s in self.unknown if s[0] in keys]:
            self.clear_source(src)
        for k in keys:
            self.nodes.pop(k, None)
            self.dependents.pop(k, None)
            bucket = self.by_pred.get(k[0])
            if bucket is not None:
                bucket.pop(k, None)
                if not bucket:
                    del self.by_pred[k[0]]
        self.entry_keys = [k for k in self.entry_keys if k not in keys]

    def collect_garbage(self) -> int:
        """Drop nodes unreachable from the entries. Returns how many."""
        out_edges: dict = {}
        for (key, _cid), targets in self.arcs.items():
            out_edges.setdefault(key, []).extend(targets.values())
        seen = set()
        todo = [k for k in self.entry_keys if k in self.nodes]
        while todo:
            k = todo.pop()
            if k in seen:
                continue
            seen.add(k)
            todo.extend(out_edges.get(k, ()))
        dead = [k for k in self.nodes if k not in seen]
        if dead:
            self.remove_nodes(dead)
        return len(dead)

    def copy(self) -> AnalysisGraph:
        g = AnalysisGraph(self.domain, self.fingerprint)
        g.nodes = {k: AnalysisNode(k, n.success, n.state) for k, n in self.nodes.items()}
        g.entry_keys = list(self.entry_keys)
        g.arcs = {s: dict(t) for s, t in self.arcs.items()}
        g.unknown = {s: dict(p) for s, p in self.unknown.items()}
        g.dependents = {k: dict(d) for k, d in self.dependents.items()}
        g.unknown_users = {k: dict(d) for k, d in self.unknown_users.items()}
        g.by_pred = {k: dict(d) for k, d in self.by_pred.items()}
        g.stats = Stats(self.stats.nodes_created, self.stats.recomputations, self.stats.body_steps)
        return g

    def rebuild_indexes(self) -> None:
        self.dependents = {}
        self.unknown_users = {}
        self.by_pred = {}
        for k in self.nodes:
            self.by_pred.setdefault(k[0], {})[k] = None
        for src, targets in self.arcs.items():
            for tgt in targets.values():
                self.dependents.setdefault(tgt, {})[src] = None
        for src, preds in self.unknown.items():
            for p in preds:
                self.unknown_users.setdefault(p, {})[src] = None


TraceFn = Callable[[str], None]


class Solver:
    """Runs the worklist to a fixed point over an existing (possibly partial) graph."""

    def __init__(self, graph: AnalysisGraph, program: ChcProgram, cancel: CancelToken | None = None,
                 trace: TraceFn | None = None) -> None:
        self.g = graph
        self.preds = program.preds
        self.flags = FLAGS[graph.domain]
        self.cancel = cancel
        self.trace = trace
        self.queue: deque = deque()
        self.queued: set = set()
        self._by_id: dict = {}

    def _clause(self, pred, cid):
        table = self._by_id.get(pred)
        if table is None:
            table = {c.clause_id: (i, c) for i, c in enumerate(self.preds.get(pred, ()))}
            self._by_id[pred] = table
        hit = table.get(cid)
        return hit[1] if hit else None

    def _poll(self) -> None:
        if self.cancel is not None and self.cancel.is_set():
            raise Cancelled()

    def enqueue(self, src: tuple) -> None:
        if src not in self.queued:
            self.queued.add(src)
            self.queue.append(src)

    def run(self, roots, pending=()) -> None:
        for key in roots:
            if key not in self.g.nodes:
                self._drive(self._node_gen(self._create(key)))
        for src in pending:
            self.enqueue(src)
        nodes = self.g.nodes
        while self.queue:
            src = self.queue.popleft()
            self.queued.discard(src)
            key, cid = src
            node = nodes.get(key)
            clause = self._clause(key[0], cid) if node is not None else None
            if clause is None:
                continue
            self._drive(self._item_gen(node, clause))
        for node in nodes.values():
            node.state = FIXPOINTED

    def _create(self, key: tuple) -> AnalysisNode:
        return self.g.add_node(key)

    def _drive(self, gen) -> None:
        stack = [gen]
        while stack:
            try:
                request = stack[-1].send(None)
            except StopIteration:
                stack.pop()
                continue
            stack.append(self._node_gen(self._create(request)))

    def _emit(self, node: AnalysisNode) -> None:
        if self.trace is not None:
            pred, call = node.key
            names = [f"v{i + 1}" for i in range(pred[1])]
            self.trace(
                f"RECOMP {pred_str(pred)} {render_pattern(call, names)} -> {render_pattern(node.success, names)}"
            )

    def _node_gen(self, node: AnalysisNode):
        self._poll()
        self.g.stats.recomputations += 1
        if node.key[1] is not None:
            for clause in self.preds.get(node.key[0], ()):
                exit = yield from self._clause_gen(node, clause)
                self._join(node, exit)
        node.state = FIXPOINTED
        self._emit(node)

    def _item_gen(self, node: AnalysisNode, clause):
        self._poll()
        self.g.stats.recomputations += 1
        exit = yield from self._clause_gen(node, clause)
        self._join(node, exit)
        self._emit(node)

    def _clause_gen(self, node: AnalysisNode, clause):
        g = self.g
        nodes = g.nodes
        preds = self.preds
        flags = self.flags
        run_eqs = kernel.run_eqs
        src = (node.key, clause.clause_id)
        g.clear_source(src)
        code = clause.code
        call = node.key[1]
        state = bytearray(call)
        if code.nvars > len(call):
            state += bytes([TOP_BYTE]) * (code.nvars - len(call))
        g.stats.body_steps += len(code.items)
        for item in code.items:
            tag = item[0]
            if tag == EQS:
                if not run_eqs(state, item[1], flags):
                    return None
            elif tag == CALL:
                _, pred, idx, pos, eqs = item
                if pred not in preds:
                    g.add_unknown(src, pred)
                    continue
                ckey = (pred, kernel.project(state, idx))
                callee = nodes.get(ckey)
                if callee is None:
                    yield ckey
                    callee = nodes[ckey]
                g.add_arc(src, pos, ckey)
                succ = callee.success
                if succ is None or not kernel.meet_at(state, idx, succ):
                    return None
                if len(eqs) and not run_eqs(state, eqs, flags):
                    return None
            else:
                return None
        return kernel.project(state, code.head_idx)

    def _join(self, node: AnalysisNode, exit: bytes | None) -> None:
        if exit is None:
            return
        old = node.success
        new = exit if old is None else kernel.lub(old, exit)
        if new == old:
            return
        node.success = new
        deps = self.g.dependents.get(node.key)
        if deps:
            for src in sorted(deps, key=_source_order):
                self.enqueue(src)


# ---------------------------------------------------------------------------


def entries_of(program: ChcProgram, domain: str, diagnostics: list | None = None) -> list:
    """Initial call patterns as ``(pred, Subst)`` pairs, deterministic order."""
    out = []
    if program.entries:
        for e in program.entries:
            pred = functor_of(e.head)
            if pred not in program.preds:
                if diagnostics is not None:
                    arities = sorted(a for (n, a) in program.preds if n == pred[0])
                    hint = f" (defined arities: {', '.join(map(str, arities))})" if arities else ""
                    diagnostics.append(
                        Diagnostic(e.span, "warning", "entry.unknown", f"entry for undefined predicate {pred_str(pred)}{hint}")
                    )
                continue
            names = tuple(a.name for a in e.head.args) if pred[1] else ()
            pa = abstract_props(e.pre, names, domain)
            if diagnostics is not None:
                for msg in pa.problems:
                    diagnostics.append(Diagnostic(e.span, "warning", "entry.invalid", msg))
            out.append((pred, pa.abs))
        return out
    for pred in root_preds(program):
        out.append((pred, Subst.top(domain, tuple(f"v{i + 1}" for i in range(pred[1])))))
    return out


def entry_keys(entries) -> list:
    keys = []
    for pred, call in entries:
        k = (pred, call.payload)
        if k not in keys:
            keys.append(k)
    return keys


def analyze(program: ChcProgram, entries=None, domain: str | None = None, cancel: CancelToken | None = None,
            trace: TraceFn | None = None) -> AnalysisGraph:
    if domain is None:
        domain = select_domain(program.assertions)
    if entries is None:
        entries = entries_of(program, domain)
    graph = AnalysisGraph(domain, fingerprint(program))
    graph.entry_keys = entry_keys(entries)
    Solver(graph, program, cancel, trace).run(graph.entry_keys)
    graph.collect_garbage()
    log.debug("analysis: %d nodes, %d recomputations", len(graph.nodes), graph.stats.recomputations)
    return graph
