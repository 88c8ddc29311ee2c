"""The CHC intermediate representation, clause identities and program deltas.

A normalized clause has a head of pairwise distinct variables and a body of
three kinds of steps: ``Unify(var, term)``, ``Builtin(kind, args)`` and
``Call(pred, vars)``. Variables are renamed to ``_V0, _V1, ...`` by first
occurrence, head variables first, so structurally equal clauses print and
hash identically.
"""

from __future__ import annotations

from array import array
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from . import kernel
from .spans import Diagnostic, Span
from .syntax import (
    COMPARISONS,
    AssertionDecl,
    Atom,
    ClauseDecl,
    Compound,
    EntryDecl,
    Int,
    SourceAst,
    Term,
    Var,
    format_atom,
    format_decl,
    format_term,
    functor_of,
    parse_program,
    term_vars,
)

Pred = tuple  # (name, arity)


def pred_str(pred: Pred) -> str:
    return f"{pred[0]}/{pred[1]}"


@dataclass(frozen=True, slots=True)
class Unify:
    var: str
    term: Term


@dataclass(frozen=True, slots=True)
class Builtin:
    kind: str  # "is", a comparison operator, or "fail"
    args: tuple


@dataclass(frozen=True, slots=True)
class Call:
    pred: Pred
    args: tuple


# compiled body items, consumed by the engine
EQS, CALL, FAIL = 0, 1, 2


@dataclass(frozen=True)
class CompiledClause:
    nvars: int
    head_idx: array
    items: tuple


@dataclass(frozen=True)
class ChcClause:
    pred: Pred
    head_vars: tuple
    body: tuple
    clause_key: int
    span: Span | None = field(default=None, compare=False)
    occurrence: int = 0
    code: CompiledClause | None = field(default=None, compare=False, repr=False)

    @property
    def clause_id(self) -> tuple[int, int]:
        return (self.clause_key, self.occurrence)


@dataclass
class ChcProgram:
    preds: dict
    assertions: list = field(default_factory=list)
    entries: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    # derived values (fingerprint, signatures); programs are not mutated after build
    memo: dict = field(default_factory=dict, repr=False, compare=False)

    def clauses(self, pred: Pred) -> tuple:
        return self.preds.get(pred, ())

    def all_clauses(self):
        for clauses in self.preds.values():
            yield from clauses


@dataclass(frozen=True)
class ProgramDelta:
    added_clauses: tuple
    deleted_clauses: tuple
    changed_preds: frozenset
    assertion_changed: bool
    entry_changed: bool
    defined_changes: frozenset = frozenset()
    old_fingerprint: int = 0
    new_fingerprint: int = 0

    @property
    def clause_delta_empty(self) -> bool:
        return not self.added_clauses and not self.deleted_clauses

    def to_json(self) -> dict:
        return {
            "added": [[pred_str(c.pred), f"{c.clause_key:016x}", c.occurrence] for c in self.added_clauses],
            "deleted": [[pred_str(c.pred), f"{c.clause_key:016x}", c.occurrence] for c in self.deleted_clauses],
            "changed_preds": sorted(pred_str(p) for p in self.changed_preds),
            "assertion_changed": self.assertion_changed,
            "entry_changed": self.entry_changed,
        }


# ---------------------------------------------------------------------------
# Normalization


class _Fresh:
    def __init__(self) -> None:
        self.n = 0

    def __call__(self) -> str:
        self.n += 1
        return f"${self.n}"


def _normalize_goal(goal: Term, fresh: _Fresh, steps: list) -> None:
    name, arity = functor_of(goal)
    if name == "=" and arity == 2:
        left, right = goal.args
        if isinstance(left, Var):
            steps.append(Unify(left.name, right))
        elif isinstance(right, Var):
            steps.append(Unify(right.name, left))
        else:
            v = fresh()
            steps.append(Unify(v, left))
            steps.append(Unify(v, right))
    elif name == "is" and arity == 2:
        left, expr = goal.args
        if isinstance(left, Var):
            steps.append(Builtin("is", (left, expr)))
        else:
            v = fresh()
            steps.append(Builtin("is", (Var(v), expr)))
            steps.append(Unify(v, left))
    elif name in COMPARISONS and arity == 2:
        steps.append(Builtin(name, goal.args))
    elif name == "true" and arity == 0:
        pass
    elif name in ("fail", "false") and arity == 0:
        steps.append(Builtin("fail", ()))
    else:
        args = []
        for a in goal.args if isinstance(goal, Compound) else ():
            if isinstance(a, Var):
                args.append(a.name)
            else:
                v = fresh()
                steps.append(Unify(v, a))
                args.append(v)
        steps.append(Call((name, arity), tuple(args)))


def _rename_term(t: Term, m: dict) -> Term:
    if isinstance(t, Var):
        return Var(m[t.name])
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_rename_term(a, m) for a in t.args))
    if isinstance(t, Atom):
        return Atom(t.name)
    return Int(t.value)


def _step_vars(step, acc: list) -> None:
    if isinstance(step, Unify):
        if step.var not in acc:
            acc.append(step.var)
        term_vars(step.term, acc)
    elif isinstance(step, Builtin):
        for a in step.args:
            term_vars(a, acc)
    else:
        for a in step.args:
            if a not in acc:
                acc.append(a)


def _rename_step(step, m: dict):
    if isinstance(step, Unify):
        return Unify(m[step.var], _rename_term(step.term, m))
    if isinstance(step, Builtin):
        return Builtin(step.kind, tuple(_rename_term(a, m) for a in step.args))
    return Call(step.pred, tuple(m[a] for a in step.args))


def normalize_clause(decl: ClauseDecl) -> ChcClause:
    head = decl.head
    pred = functor_of(head)
    fresh = _Fresh()
    seen: set[str] = set()
    head_vars: list[str] = []
    steps: list = []
    for arg in head.args if isinstance(head, Compound) else ():
        if isinstance(arg, Var) and arg.name not in seen:
            head_vars.append(arg.name)
            seen.add(arg.name)
        else:
            h = fresh()
            head_vars.append(h)
            steps.append(Unify(h, arg))
            seen.update(term_vars(arg))
    for goal in decl.body:
        _normalize_goal(goal, fresh, steps)
    order = list(head_vars)
    for step in steps:
        _step_vars(step, order)
    mapping = {name: f"_V{i}" for i, name in enumerate(order)}
    hv = tuple(mapping[v] for v in head_vars)
    body = tuple(_rename_step(s, mapping) for s in steps)
    key = clause_key_of(pred, hv, body)
    return ChcClause(pred, hv, body, key, decl.span, 0, compile_clause(len(order), hv, body))


# ---------------------------------------------------------------------------
# Clause keys


def _ser_term(t: Term, out: list) -> None:
    if isinstance(t, Var):
        out.append(f"v{t.name[2:]};")
    elif isinstance(t, Int):
        out.append(f"i{t.value};")
    elif isinstance(t, Atom):
        out.append(f"a{len(t.name)}:{t.name}")
    else:
        out.append(f"c{len(t.functor)}:{t.functor}/{len(t.args)}(")
        for a in t.args:
            _ser_term(a, out)
        out.append(")")


def serialize_clause(pred: Pred, head_vars: tuple, body: tuple) -> bytes:
    out = [f"{len(pred[0])}:{pred[0]}/{pred[1]}|"]
    for step in body:
        if isinstance(step, Unify):
            out.append(f"U{step.var[2:]}=")
            _ser_term(step.term, out)
        elif isinstance(step, Builtin):
            out.append(f"B{len(step.kind)}:{step.kind}(")
            for a in step.args:
                _ser_term(a, out)
            out.append(")")
        else:
            out.append(f"C{len(step.pred[0])}:{step.pred[0]}/{step.pred[1]}(")
            out.append(",".join(a[2:] for a in step.args))
            out.append(")")
    return "".join(out).encode("utf-8")


def clause_key_of(pred: Pred, head_vars: tuple, body: tuple) -> int:
    """FNV-1a 64 of the canonical serialization. Collisions are possible in
    principle (about 2**-64 per pair) and are not detected."""
    return kernel.fnv1a64(serialize_clause(pred, head_vars, body))


def clause_key(clause: ChcClause) -> int:
    return clause_key_of(clause.pred, clause.head_vars, clause.body)


# ---------------------------------------------------------------------------
# Compilation to kernel code


def _shape_of(t: Term) -> int:
    if isinstance(t, Int):
        return kernel.INT
    if isinstance(t, Atom):
        return kernel.LST if t.name == "[]" else kernel.ATM
    if t.functor == "." and len(t.args) == 2:
        return kernel.LST
    return kernel.STRUCT


def _vidx(name: str) -> int:
    return int(name[2:])


def compile_clause(nvars: int, head_vars: tuple, body: tuple) -> CompiledClause:
    items = []
    code: list[int] = []
    pending = False
    for pos, step in enumerate(body):
        if isinstance(step, Unify):
            x = _vidx(step.var)
            if isinstance(step.term, Var):
                code += [kernel.EQ, x, _vidx(step.term.name)]
            else:
                vs = [_vidx(v) for v in term_vars(step.term)]
                code += [kernel.BIND, x, _shape_of(step.term), len(vs)] + vs
            pending = True
        elif isinstance(step, Builtin):
            if step.kind == "is":
                x = _vidx(step.args[0].name)
                vs = [_vidx(v) for v in term_vars(step.args[1])]
                code += [kernel.IS, x, kernel.INT, len(vs)] + vs
                pending = True
            elif step.kind == "fail":
                items.append((FAIL,))
                break
        else:
            if pending:
                items.append((EQS, array("i", code)))
                pending = False
            items.append((CALL, step.pred, array("i", [_vidx(a) for a in step.args]), pos, array("i", code)))
    if pending:
        items.append((EQS, array("i", code)))
    return CompiledClause(nvars, array("i", [_vidx(v) for v in head_vars]), tuple(items))


# ---------------------------------------------------------------------------
# Programs


def _assign_occurrences(clauses: list[ChcClause]) -> tuple:
    seen: Counter = Counter()
    out = []
    for c in clauses:
        out.append(ChcClause(c.pred, c.head_vars, c.body, c.clause_key, c.span, seen[c.clause_key], c.code))
        seen[c.clause_key] += 1
    return tuple(out)


@lru_cache(maxsize=1)
def _prelude() -> dict:
    text = resources.files("verifly").joinpath("prelude.pl").read_text(encoding="utf-8")
    ast = parse_program(text, "<prelude>")
    assert not ast.syntax_errors, ast.syntax_errors
    preds: dict = {}
    for decl in ast.clauses:
        c = normalize_clause(decl)
        preds.setdefault(c.pred, []).append(c)
    return preds


def _called(clauses) -> set:
    return {s.pred for c in clauses for s in c.body if isinstance(s, Call)}


def normalize_ast(ast: SourceAst) -> list[ChcClause]:
    return [normalize_clause(d) for d in ast.clauses]


def build_program(asts: list[SourceAst], prelude: bool = True, normalized: list | None = None) -> ChcProgram:
    """Normalize parsed files into one flat program, in file order.

    ``normalized``, if given, holds ``normalize_ast(ast)`` for each ast and
    saves redoing it for files that did not change.
    """
    grouped: dict = {}
    assertions: list[AssertionDecl] = []
    entries: list[EntryDecl] = []
    for i, ast in enumerate(asts):
        for c in normalized[i] if normalized is not None else normalize_ast(ast):
            grouped.setdefault(c.pred, []).append(c)
        assertions.extend(ast.assertions)
        entries.extend(ast.entries)
    if prelude:
        library = _prelude()
        todo = sorted(_called(c for cs in grouped.values() for c in cs) - grouped.keys())
        while todo:
            pred = todo.pop(0)
            if pred in grouped or pred not in library:
                continue
            grouped[pred] = list(library[pred])
            todo.extend(sorted(_called(grouped[pred]) - grouped.keys()))
    preds = {p: _assign_occurrences(cs) for p, cs in grouped.items()}
    program = ChcProgram(preds, assertions, entries)
    for clauses in preds.values():
        for c in clauses:
            missing = sorted({s.pred for s in c.body if isinstance(s, Call) and s.pred not in preds})
            for p in missing:
                program.diagnostics.append(
                    Diagnostic(c.span, "warning", "unknown-pred", f"call to undefined predicate {pred_str(p)}")
                )
    return program


def normalize(ast: SourceAst, prelude: bool = True) -> ChcProgram:
    return build_program([ast], prelude=prelude)


def call_graph(program: ChcProgram) -> dict:
    return {p: sorted(_called(cs) & program.preds.keys()) for p, cs in program.preds.items()}


def root_preds(program: ChcProgram) -> list:
    """Predicates in call-graph components that no other component calls.

    Returned in program order. A self-recursive predicate with no outside
    caller is a root; a predicate called from elsewhere is not.
    """
    graph = call_graph(program)
    comp = _sccs(graph)
    called_from_outside = set()
    for p, callees in graph.items():
        for q in callees:
            if comp[q] != comp[p]:
                called_from_outside.add(comp[q])
    return [p for p in program.preds if comp[p] not in called_from_outside]


def _sccs(graph: dict) -> dict:
    # iterative Tarjan
    index: dict = {}
    low: dict = {}
    comp: dict = {}
    stack: list = []
    on: set = set()
    counter = 0
    for root in graph:
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            node, i = work.pop()
            if i == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on.add(node)
            succ = graph[node]
            if i < len(succ):
                work.append((node, i + 1))
                nxt = succ[i]
                if nxt not in index:
                    work.append((nxt, 0))
                elif nxt in on:
                    low[node] = min(low[node], index[nxt])
                continue
            if low[node] == index[node]:
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp[w] = index[node]
                    if w == node:
                        break
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return comp


def _memoized(fn):
    name = fn.__name__

    def wrapper(program: ChcProgram):
        try:
            return program.memo[name]
        except KeyError:
            value = program.memo[name] = fn(program)
            return value

    wrapper.__name__ = name
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_memoized
def entry_signature(program: ChcProgram) -> tuple:
    if program.entries:
        return ("declared",) + tuple(format_decl(e) for e in program.entries)
    return ("implicit",) + tuple(root_preds(program))


@_memoized
def assertion_signature(program: ChcProgram) -> tuple:
    return tuple(sorted(format_decl(a) for a in program.assertions))


@_memoized
def fingerprint(program: ChcProgram) -> int:
    """Hash of every clause identity plus the assertion and entry multisets."""
    parts = []
    for pred in sorted(program.preds):
        for c in program.preds[pred]:
            parts.append(f"{pred_str(pred)}#{c.clause_key:016x}#{c.occurrence}")
    parts.append("|A|")
    parts.extend(assertion_signature(program))
    parts.append("|E|")
    parts.extend(str(x) for x in entry_signature(program))
    return kernel.fnv1a64("\n".join(parts).encode("utf-8"))


def diff(old: ChcProgram, new: ChcProgram) -> ProgramDelta:
    added = []
    deleted = []
    for pred in list(old.preds) + [p for p in new.preds if p not in old.preds]:
        old_cs = old.preds.get(pred, ())
        new_cs = new.preds.get(pred, ())
        if old_cs is new_cs:
            continue
        old_ids = [c.clause_id for c in old_cs]
        new_ids = [c.clause_id for c in new_cs]
        if old_ids == new_ids:
            continue
        old_ids, new_ids = set(old_ids), set(new_ids)
        deleted.extend(c for c in old_cs if c.clause_id not in new_ids)
        added.extend(c for c in new_cs if c.clause_id not in old_ids)
    changed = frozenset(c.pred for c in added) | frozenset(c.pred for c in deleted)
    defined = frozenset(p for p in changed if (p in old.preds) != (p in new.preds))
    return ProgramDelta(
        tuple(added),
        tuple(deleted),
        changed,
        assertion_signature(old) != assertion_signature(new),
        entry_signature(old) != entry_signature(new),
        defined,
        fingerprint(old),
        fingerprint(new),
    )


def apply_clause_delta(old: ChcProgram, delta: ProgramDelta) -> dict:
    """Clause-key multisets per predicate after applying ``delta`` to ``old``."""
    out = {p: Counter(c.clause_key for c in cs) for p, cs in old.preds.items()}
    for c in delta.deleted_clauses:
        out[c.pred][c.clause_key] -= 1
    for c in delta.added_clauses:
        out.setdefault(c.pred, Counter())[c.clause_key] += 1
    return {p: +cnt for p, cnt in out.items() if +cnt}


def clause_multisets(program: ChcProgram) -> dict:
    return {p: Counter(c.clause_key for c in cs) for p, cs in program.preds.items() if cs}


# ---------------------------------------------------------------------------
# Text dump


def format_step(step) -> str:
    if isinstance(step, Unify):
        return f"{step.var} = {format_term(step.term, 699)}"
    if isinstance(step, Builtin):
        if step.kind == "fail":
            return "fail"
        return f"{format_term(step.args[0], 699)} {step.kind} {format_term(step.args[1], 699)}"
    if not step.args:
        return format_atom(step.pred[0])
    return f"{format_atom(step.pred[0])}({', '.join(step.args)})"


def format_clause(c: ChcClause) -> str:
    head = format_atom(c.pred[0]) if not c.head_vars else f"{format_atom(c.pred[0])}({', '.join(c.head_vars)})"
    if not c.body:
        return f"{head}."
    return f"{head} :- {', '.join(format_step(s) for s in c.body)}."


def dump_chc(program: ChcProgram) -> str:
    return "".join(format_clause(c) + "\n" for c in program.all_clauses())
