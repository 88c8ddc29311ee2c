"""Synthetic corpora, random edit scripts, and the incremental-vs-scratch benchmark.

Generated predicates are all binary, ``p(List, Out)``, and recurse
structurally on the first argument: every body call receives the tail of
the head's list, so SLD resolution terminates on any finite input.
Predicate 0 is a hub that many others call, so a destructive edit there
invalidates widely; every other call stays inside its own file and only
targets lower-numbered predicates, which keeps the call graph acyclic apart
from self-recursion.
"""

from __future__ import annotations

import csv
import json
import logging
import random
import statistics
import time
from dataclasses import dataclass, field, replace

from .chc import build_program, diff
from .domains import select_domain
from .engine import analyze
from .incremental import apply_delta
from .syntax import parse_program

log = logging.getLogger(__name__)

SHAPES = ("chain", "tree", "dense")
EDIT_KINDS = ("add_clause", "delete_clause", "modify_clause", "edit_assertion")
CSV_HEADER = ("edit_kind", "scratch_ms", "incremental_ms", "speedup", "nodes_reused", "nodes_recomputed", "graphs_equal")
HUB_PROBABILITY = 0.25
POSTS = ("ground(Y)", "list(Y)", "(ground(Y), list(Y))", "int(Y)", "atm(Y)")


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 1
    files: int = 1
    clauses_total: int = 10
    preds: int = 3
    shape: str = "chain"
    assertion_density: float = 0.0

    def validate(self) -> None:
        problems = []
        if self.shape not in SHAPES:
            problems.append(f"shape must be one of {', '.join(SHAPES)}")
        if self.files < 1 or self.preds < 1:
            problems.append("files and preds must be positive")
        if self.files > self.preds:
            problems.append(f"{self.files} files cannot each hold a predicate with only {self.preds} predicates")
        if self.clauses_total < self.preds:
            problems.append("clauses_total must be at least preds")
        if not 0.0 <= self.assertion_density <= 1.0:
            problems.append("assertion_density must lie in [0, 1]")
        if problems:
            raise ValueError("infeasible corpus spec: " + "; ".join(problems))

    @classmethod
    def from_json(cls, obj: dict) -> CorpusSpec:
        known = {f: obj[f] for f in ("seed", "files", "clauses_total", "preds", "shape", "assertion_density") if f in obj}
        unknown = set(obj) - set(known)
        if unknown:
            raise ValueError(f"unknown corpus spec fields: {sorted(unknown)}")
        spec = cls(**known)
        spec.validate()
        return spec

    @classmethod
    def load(cls, path: str) -> CorpusSpec:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


# desk-scale corpus shaped like the chat-80 program: 27 files, a little over 5k lines
CHAT80 = CorpusSpec(seed=80, files=27, clauses_total=4800, preds=1200, shape="dense", assertion_density=0.2)


@dataclass(frozen=True)
class Item:
    kind: str  # "entry", "assertion" or "clause"
    pred: str
    text: str


@dataclass(frozen=True)
class PredInfo:
    name: str
    file: str
    callees: tuple


@dataclass(frozen=True)
class Corpus:
    spec: CorpusSpec
    files: tuple  # ((file name, (Item, ...)), ...)
    info: tuple  # (PredInfo, ...)

    def sources(self) -> dict:
        return {name: "".join(it.text + "\n" for it in items) for name, items in self.files}

    def pred_info(self, name: str) -> PredInfo:
        for p in self.info:
            if p.name == name:
                return p
        raise KeyError(name)

    def positions(self, kind: str, pred: str | None = None) -> list:
        out = []
        for fi, (_, items) in enumerate(self.files):
            for ii, it in enumerate(items):
                if it.kind == kind and (pred is None or it.pred == pred):
                    out.append((fi, ii))
        return out

    def clause_count(self) -> int:
        return len(self.positions("clause"))

    def apply(self, edit: Edit) -> Corpus:
        files = [list(items) for _, items in self.files]
        if edit.kind == "add_clause":
            at = self.positions("clause", edit.pred)
            if not at:
                raise ValueError(f"no clauses of {edit.pred} to add after")
            fi, ii = at[-1]
            files[fi].insert(ii + 1, Item("clause", edit.pred, edit.text))
        elif edit.kind in ("delete_clause", "modify_clause"):
            at = self.positions("clause", edit.pred)
            if not 0 <= edit.index < len(at):
                raise ValueError(f"{edit.pred} has no clause {edit.index}")
            fi, ii = at[edit.index]
            if edit.kind == "delete_clause":
                del files[fi][ii]
            else:
                files[fi][ii] = Item("clause", edit.pred, edit.text)
        elif edit.kind == "edit_assertion":
            at = self.positions("assertion")
            if not 0 <= edit.index < len(at):
                raise ValueError(f"no assertion {edit.index}")
            fi, ii = at[edit.index]
            files[fi][ii] = replace(files[fi][ii], text=edit.text)
        else:
            raise ValueError(f"unknown edit kind {edit.kind!r}")
        return Corpus(self.spec, tuple((n, tuple(f)) for (n, _), f in zip(self.files, files)), self.info)


@dataclass(frozen=True)
class Edit:
    kind: str
    pred: str | None = None
    index: int = 0
    text: str | None = None


@dataclass(frozen=True)
class EditScript:
    seed: int
    edits: tuple = ()


# ---------------------------------------------------------------------------
# generation


def _pred_name(i: int) -> str:
    return "hub" if i == 0 else f"p{i}"


def _base_clause(rng: random.Random, name: str) -> str:
    out = rng.choice(("[]", "0", "a", "none"))
    if rng.random() < 0.5:
        return f"{name}([], {out})."
    return f"{name}([], Y) :- Y = {out}."


def _rec_clause(rng: random.Random, p: PredInfo) -> str:
    goals = []
    outs = []
    for j, callee in enumerate(rng.sample(p.callees, min(len(p.callees), rng.randint(0, 2)))):
        goals.append(f"{callee}(T, R{j})")
        outs.append(f"R{j}")
    if rng.random() < 0.7:
        goals.append(f"{p.name}(T, S)")
        outs.append("S")
    if not outs:
        outs.append("T")
    form = rng.randrange(4)
    if form == 0:
        goals.append(f"Y = [H|{outs[-1]}]")
    elif form == 1:
        goals.append(f"Y = f({', '.join(outs)})")
    elif form == 2:
        goals.append(f"Y = {outs[0]}")
    else:
        goals.append(f"Y = [{', '.join(outs)}]")
    return f"{p.name}([H|T], Y) :- {', '.join(goals)}."


def _assertion(rng: random.Random, name: str) -> str:
    return f":- pred {name}(X, Y) : (ground(X), list(X)) => {rng.choice(POSTS)}."


def gen_program(spec: CorpusSpec) -> Corpus:
    """Deterministic corpus for ``spec``; one ``.pl`` source per file."""
    spec.validate()
    rng = random.Random(spec.seed)
    file_of = [i * spec.files // spec.preds for i in range(spec.preds)]
    fnames = [f"f{k:02d}.pl" for k in range(spec.files)]
    infos = []
    for i in range(spec.preds):
        same = [j for j in range(i) if file_of[j] == file_of[i] and j != 0]
        if spec.shape == "chain":
            picks = same[-1:]
        elif spec.shape == "tree":
            parent = (i - 1) // 2
            picks = [parent] if parent in same else same[-1:]
        else:
            picks = rng.sample(same, min(len(same), 3))
        if i and (not picks or rng.random() < HUB_PROBABILITY):
            picks = picks + [0]
        infos.append(PredInfo(_pred_name(i), fnames[file_of[i]], tuple(_pred_name(j) for j in sorted(set(picks)))))

    extra = [0] * spec.preds
    for _ in range(spec.clauses_total - spec.preds):
        extra[rng.randrange(spec.preds)] += 1

    called = {c for p in infos for c in p.callees}
    items: dict = {f: [] for f in fnames}
    for i, p in enumerate(infos):
        bucket = items[p.file]
        if p.name not in called:
            bucket.append(Item("entry", p.name, f":- entry {p.name}(X, Y) : (ground(X), list(X))."))
        if rng.random() < spec.assertion_density:
            bucket.append(Item("assertion", p.name, _assertion(rng, p.name)))
        bucket.append(Item("clause", p.name, _base_clause(rng, p.name)))
        for _ in range(extra[i]):
            bucket.append(Item("clause", p.name, _rec_clause(rng, p)))
    return Corpus(spec, tuple((f, tuple(items[f])) for f in fnames), tuple(infos))


def gen_edit_script(seed: int, corpus: Corpus, length: int = 10, kinds=EDIT_KINDS) -> EditScript:
    """A script of ``length`` edits, each applicable to the state the previous ones leave."""
    if corpus.clause_count() == 0:
        raise ValueError("cannot edit an empty program")
    rng = random.Random(seed)
    edits = []
    state = corpus
    for _ in range(length):
        options = list(kinds)
        if not state.positions("assertion") and "edit_assertion" in options:
            options.remove("edit_assertion")
        if not options:
            break
        kind = rng.choice(options)
        if kind == "edit_assertion":
            at = state.positions("assertion")
            idx = rng.randrange(len(at))
            fi, ii = at[idx]
            old = state.files[fi][1][ii]
            text = old.text
            while text == old.text:
                text = _assertion(rng, old.pred)
            edit = Edit(kind, old.pred, idx, text)
        else:
            p = rng.choice(state.info)
            n = len(state.positions("clause", p.name))
            if kind == "delete_clause" and n < 2:
                kind = "add_clause"
            if kind == "add_clause":
                edit = Edit(kind, p.name, n, _rec_clause(rng, p))
            elif kind == "delete_clause":
                edit = Edit(kind, p.name, rng.randrange(n))
            else:
                idx = rng.randrange(n)
                text = _rec_clause(rng, p) if idx else _base_clause(rng, p.name)
                edit = Edit(kind, p.name, idx, text)
        state = state.apply(edit)
        edits.append(edit)
    return EditScript(seed, tuple(edits))


# ---------------------------------------------------------------------------
# benchmark


class BenchMismatch(AssertionError):
    """Incremental and scratch graphs differ; timings are meaningless."""


@dataclass
class BenchConfig:
    repetitions: int = 5
    domain: str | None = None


@dataclass
class BenchRow:
    edit_kind: str
    scratch_ms: float
    incremental_ms: float
    speedup: float
    nodes_reused: int
    nodes_recomputed: int
    graphs_equal: bool

    def csv_row(self) -> list:
        return [
            self.edit_kind,
            f"{self.scratch_ms:.3f}",
            f"{self.incremental_ms:.3f}",
            f"{self.speedup:.3f}",
            self.nodes_reused,
            self.nodes_recomputed,
            "true" if self.graphs_equal else "false",
        ]


def program_of(corpus: Corpus):
    src = corpus.sources()
    return build_program([parse_program(src[f], f) for f in sorted(src)])


def _median_ms(fn, reps: int):
    times = []
    out = None
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        times.append((time.perf_counter() - t0) * 1000.0)
    return statistics.median(times), out


def run_bench(corpus: Corpus, scripts, config: BenchConfig | None = None) -> list[BenchRow]:
    """Time scratch vs incremental analysis for every edit; raises :class:`BenchMismatch` on divergence."""
    config = config or BenchConfig()
    rows: list[BenchRow] = []
    base = program_of(corpus)
    domain = config.domain or select_domain(base.assertions)
    for script in scripts:
        state, program = corpus, base
        graph = analyze(program, domain=domain)
        for edit in script.edits:
            state = state.apply(edit)
            new_program = program_of(state)
            scratch_ms, scratch = _median_ms(lambda: analyze(new_program, domain=domain), config.repetitions)

            def incremental():
                return apply_delta(graph, new_program, diff(program, new_program), domain)

            inc_ms, (new_graph, report) = _median_ms(incremental, config.repetitions)
            equal = new_graph.same_as(scratch)
            row = BenchRow(edit.kind, scratch_ms, inc_ms, scratch_ms / inc_ms if inc_ms > 0 else float("inf"),
                           report.reused_nodes, report.recomputations, equal)
            rows.append(row)
            log.info("%s %s: scratch %.1f ms, incremental %.1f ms", edit.kind, edit.pred, scratch_ms, inc_ms)
            if not equal:
                raise BenchMismatch(f"graphs differ after {edit}", rows)
            program, graph = new_program, new_graph
    return rows


def write_csv(rows, path_or_file) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_row())

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            emit(fh)
