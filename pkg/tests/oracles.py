"""Independent concrete semantics used as a test oracle.

A small SLD interpreter works directly on the parsed source, with no CHC
normalization and no abstract code, so it shares nothing with the analyzer
beyond the parser. Runs are depth bounded; a branch that hits the bound is
pruned, which keeps every reported success genuine.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from importlib import resources

from verifly import kernel
from verifly.domains import FLAGS
from verifly.syntax import Atom, Compound, Int, Var, functor_of, make_list, parse_program

MAX_DEPTH = 6
POOL_ATOMS = (Atom("a"), Atom("b"), Int(0), Int(1))


class _EvalError(Exception):
    pass


# ---------------------------------------------------------------------------
# terms and unification


def walk(t, s):
    while isinstance(t, Var) and t.name in s:
        t = s[t.name]
    return t


def resolve(t, s):
    t = walk(t, s)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(resolve(a, s) for a in t.args))
    return t


def _occurs(name, t, s) -> bool:
    t = walk(t, s)
    if isinstance(t, Var):
        return t.name == name
    if isinstance(t, Compound):
        return any(_occurs(name, a, s) for a in t.args)
    return False


def unify(a, b, s):
    """Extended substitution or ``None``; always performs the occurs check."""
    todo = [(a, b)]
    s = dict(s)
    while todo:
        x, y = todo.pop()
        x, y = walk(x, s), walk(y, s)
        if isinstance(x, Var) and isinstance(y, Var) and x.name == y.name:
            continue
        if isinstance(x, Var):
            if _occurs(x.name, y, s):
                return None
            s[x.name] = y
        elif isinstance(y, Var):
            if _occurs(y.name, x, s):
                return None
            s[y.name] = x
        elif isinstance(x, Atom) and isinstance(y, Atom):
            if x.name != y.name:
                return None
        elif isinstance(x, Int) and isinstance(y, Int):
            if x.value != y.value:
                return None
        elif isinstance(x, Compound) and isinstance(y, Compound):
            if x.functor != y.functor or len(x.args) != len(y.args):
                return None
            todo.extend(zip(x.args, y.args))
        else:
            return None
    return s


def is_ground(t) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, Compound):
        return all(is_ground(a) for a in t.args)
    return True


def _eval(t, s) -> int:
    t = walk(t, s)
    if isinstance(t, Int):
        return t.value
    if isinstance(t, Compound):
        if t.functor == "-" and len(t.args) == 1:
            return -_eval(t.args[0], s)
        if len(t.args) == 2 and t.functor in ("+", "-", "*", "/"):
            x, y = _eval(t.args[0], s), _eval(t.args[1], s)
            if t.functor == "+":
                return x + y
            if t.functor == "-":
                return x - y
            if t.functor == "*":
                return x * y
            if y == 0:
                raise _EvalError("division by zero")
            return x // y
    raise _EvalError(f"cannot evaluate {t!r}")


_COMPARE = {
    "<": lambda x, y: x < y,
    ">": lambda x, y: x > y,
    "=<": lambda x, y: x <= y,
    ">=": lambda x, y: x >= y,
    "=:=": lambda x, y: x == y,
    "=\\=": lambda x, y: x != y,
}


# ---------------------------------------------------------------------------
# interpreter


def _rename(t, suffix: str):
    if isinstance(t, Var):
        return Var(t.name + suffix)
    if isinstance(t, Compound):
        return Compound(t.functor, tuple(_rename(a, suffix) for a in t.args))
    return t


def _head_args(head) -> tuple:
    return head.args if isinstance(head, Compound) else ()


@dataclass
class Interpreter:
    clauses: dict  # pred -> [ClauseDecl]
    max_depth: int = MAX_DEPTH
    max_steps: int = 5000  # per query; exhausting it prunes like the depth bound
    calls: list = field(default_factory=list)  # (pred, resolved call args)
    successes: list = field(default_factory=list)  # (pred, call args, success args)
    _fresh: itertools.count = field(default_factory=itertools.count)
    _budget: int = 0

    @classmethod
    def from_sources(cls, texts, with_prelude: bool = True, **kw) -> Interpreter:
        clauses: dict = {}
        for text in texts:
            for c in parse_program(text).clauses:
                clauses.setdefault(functor_of(c.head), []).append(c)
        if with_prelude:
            lib = resources.files("verifly").joinpath("prelude.pl").read_text(encoding="utf-8")
            extra: dict = {}
            for c in parse_program(lib).clauses:
                extra.setdefault(functor_of(c.head), []).append(c)
            for pred, cs in extra.items():
                clauses.setdefault(pred, cs)
        return cls(clauses, **kw)

    def solve(self, pred, args):
        """Concrete successes (resolved argument tuples) of ``pred(args)``."""
        goal = Compound(pred[0], tuple(args)) if pred[1] else Atom(pred[0])
        self._budget = self.max_steps
        for s in self._goal(goal, {}, 0):
            yield tuple(resolve(a, s) for a in args)

    def _conj(self, goals, s, depth):
        if not goals:
            yield s
            return
        for s1 in self._goal(goals[0], s, depth):
            yield from self._conj(goals[1:], s1, depth)

    def _goal(self, goal, s, depth):
        pred = functor_of(goal)
        name, arity = pred
        args = _head_args(goal)
        if name == "=" and arity == 2:
            s1 = unify(args[0], args[1], s)
            if s1 is not None:
                yield s1
            return
        if name == "is" and arity == 2:
            try:
                v = _eval(args[1], s)
            except _EvalError:
                return
            s1 = unify(args[0], Int(v), s)
            if s1 is not None:
                yield s1
            return
        if name in _COMPARE and arity == 2:
            try:
                ok = _COMPARE[name](_eval(args[0], s), _eval(args[1], s))
            except _EvalError:
                return
            if ok:
                yield s
            return
        if arity == 0 and name == "true":
            yield s
            return
        if arity == 0 and name in ("fail", "false"):
            return
        if depth >= self.max_depth or self._budget <= 0:
            return
        call_args = tuple(resolve(a, s) for a in args)
        self.calls.append((pred, call_args))
        for clause in self.clauses.get(pred, ()):
            if self._budget <= 0:
                return
            self._budget -= 1
            suffix = f"#{next(self._fresh)}"
            head = _rename(clause.head, suffix)
            s1 = unify(Compound(name, tuple(args)), head, s) if arity else s
            if s1 is None:
                continue
            body = [_rename(g, suffix) for g in clause.body]
            for s2 in self._conj(body, s1, depth + 1):
                if self._budget <= 0:
                    return
                self._budget -= 1
                self.successes.append((pred, call_args, tuple(resolve(a, s2) for a in args)))
                yield s2


# ---------------------------------------------------------------------------
# concretization


def shape_class(t) -> int:
    if isinstance(t, Var):
        return kernel.ANY
    if isinstance(t, Int):
        return kernel.INT
    if isinstance(t, Atom):
        return kernel.LST if t.name == "[]" else kernel.ATM
    if t.functor == "." and len(t.args) == 2:
        return kernel.LST
    return kernel.STRUCT


def in_gamma(values, payload, domain: str) -> bool:
    """Is the concrete argument tuple described by ``payload`` (``None`` is bottom)?"""
    if payload is None:
        return False
    flags = FLAGS[domain]
    for t, b in zip(values, payload):
        if flags & kernel.USE_GROUND and b & kernel.G and not is_ground(t):
            return False
        shape = b & kernel.TMASK
        if flags & kernel.USE_TYPES and shape != kernel.ANY and shape_class(t) != shape:
            return False
    return True


def pool() -> list:
    """Ground constants and lists of them up to length 3."""
    out = list(POOL_ATOMS)
    for n in range(4):
        for items in itertools.product(POOL_ATOMS, repeat=n):
            out.append(make_list(list(items)))
    return out


def sample_calls(payload, domain: str, rng: random.Random, limit: int = 60) -> list:
    """Concrete argument tuples inside gamma(payload), drawn from the pool plus fresh variables."""
    if payload is None:
        return []
    choices = []
    base = pool()
    for i, b in enumerate(payload):
        opts = [t for t in base if in_gamma((t,), bytes([b]), domain)]
        if in_gamma((Var("_"),), bytes([b]), domain):
            opts.append(Var(f"Free{i}"))
        choices.append(opts)
    if any(not o for o in choices):
        return []
    total = 1
    for o in choices:
        total *= len(o)
    if total <= limit:
        return [tuple(c) for c in itertools.product(*choices)]
    # a free variable is one option among hundreds; favour it so that output
    # arguments are usually left open, as real calls leave them
    def pick(o):
        if isinstance(o[-1], Var) and rng.random() < 0.5:
            return o[-1]
        return rng.choice(o)

    return [tuple(pick(o) for o in choices) for _ in range(limit)]


def check_graph_soundness(graph, texts, rng: random.Random, limit: int = 60, max_depth: int = MAX_DEPTH,
                          max_steps: int = 5000) -> list:
    """Run concrete calls from every entry and return a list of problems (empty if sound).

    For each concrete call or success observed, every graph node whose call
    pattern covers the call must describe the success, and some node must
    cover each reachable call.
    """
    interp = Interpreter.from_sources(texts, max_depth=max_depth, max_steps=max_steps)
    problems = []
    for pred, call in graph.entry_keys:
        for args in sample_calls(call, graph.domain, rng, limit):
            for _ in interp.solve(pred, args):
                pass
    by_pred: dict = {}
    for n in graph.nodes.values():
        by_pred.setdefault(n.key[0], []).append(n)
    for pred, args in interp.calls:
        if not any(in_gamma(args, n.key[1], graph.domain) for n in by_pred.get(pred, ())):
            if pred in interp.clauses:
                problems.append(f"uncovered call {pred}{args}")
    for pred, call_args, succ in interp.successes:
        for n in by_pred.get(pred, ()):
            if in_gamma(call_args, n.key[1], graph.domain) and not in_gamma(succ, n.success, graph.domain):
                problems.append(f"success {pred}{succ} outside node {n.key} success {n.success!r}")
    return problems
