"""Abstract domains: groundness ("modes"), depth-0 shape types, and their product.

All three share one encoding (see ``_pykernel``): a byte per variable holding
a groundness bit and a shape element. A domain is just a mask over which
component is tracked, so the product is literally the pair of its parts.

Shape elements form the flat lattice ``bottom < int, atm, lst, struct < any``.
A variable at a shape other than ``any`` is definitely bound, with that
principal functor class. ``lst`` covers ``[]`` and every list cell.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field

from . import kernel
from .chc import Builtin, ChcClause, Unify
from .syntax import Atom, Compound, Int, Term, Var, format_term, functor_of, term_vars

MODES, TYPES, PRODUCT = "modes", "types", "product"
DOMAINS = (MODES, TYPES, PRODUCT)
FLAGS = {MODES: kernel.USE_GROUND, TYPES: kernel.USE_TYPES, PRODUCT: kernel.USE_GROUND | kernel.USE_TYPES}
TOP_BYTE = kernel.ANY

TYPE_NAMES = {kernel.INT: "int", kernel.ATM: "atm", kernel.LST: "lst", kernel.STRUCT: "struct", kernel.ANY: "any"}
TYPE_CODES = {v: k for k, v in TYPE_NAMES.items()}

GROUND_LITERALS = {"ground": None}
TYPE_LITERALS = {
    "int": kernel.INT,
    "num": kernel.INT,
    "atm": kernel.ATM,
    "list": kernel.LST,
    "struct": kernel.STRUCT,
}


class DomainMismatch(ValueError):
    """Operands live in different domains or over different scopes."""


@dataclass(frozen=True)
class Subst:
    """An abstract substitution over an ordered variable scope.

    ``payload`` is ``None`` for bottom, otherwise one byte per scope variable.
    """

    domain: str
    scope: tuple
    payload: bytes | None

    @classmethod
    def top(cls, domain: str, scope) -> Subst:
        scope = tuple(scope)
        return cls(domain, scope, bytes([TOP_BYTE]) * len(scope))

    @classmethod
    def bottom(cls, domain: str, scope) -> Subst:
        return cls(domain, tuple(scope), None)

    @classmethod
    def make(cls, domain: str, scope, ground=(), types=None) -> Subst:
        """Build from a ground set and a ``{var: "int"|...}`` map.

        Components the domain does not track are ignored.
        """
        scope = tuple(scope)
        flags = FLAGS[domain]
        types = types or {}
        out = bytearray()
        for v in scope:
            b = TYPE_CODES[types.get(v, "any")] if flags & kernel.USE_TYPES else TOP_BYTE
            if v in ground and flags & kernel.USE_GROUND:
                b |= kernel.G
            out.append(b)
        return cls(domain, scope, bytes(out))

    @property
    def is_bottom(self) -> bool:
        return self.payload is None

    @property
    def ground(self) -> frozenset:
        if self.payload is None:
            return frozenset(self.scope)
        return frozenset(v for v, b in zip(self.scope, self.payload) if b & kernel.G)

    @property
    def types(self) -> dict:
        if self.payload is None:
            return {}
        return {v: TYPE_NAMES[b & kernel.TMASK] for v, b in zip(self.scope, self.payload)}

    def groundness_part(self) -> Subst:
        if self.payload is None:
            return Subst(MODES, self.scope, None)
        return Subst(MODES, self.scope, bytes((b & kernel.G) | TOP_BYTE for b in self.payload))

    def types_part(self) -> Subst:
        if self.payload is None:
            return Subst(TYPES, self.scope, None)
        return Subst(TYPES, self.scope, bytes(b & kernel.TMASK for b in self.payload))

    def render(self, only=None) -> str:
        return render(self, only)

    def __str__(self) -> str:
        return render(self)


def _same(a: Subst, b: Subst) -> None:
    if a.domain != b.domain or a.scope != b.scope:
        raise DomainMismatch(f"{a.domain}{list(a.scope)} vs {b.domain}{list(b.scope)}")


def leq(a: Subst, b: Subst) -> bool:
    _same(a, b)
    if a.payload is None:
        return True
    if b.payload is None:
        return False
    return kernel.leq(a.payload, b.payload)


def lub(a: Subst, b: Subst) -> Subst:
    _same(a, b)
    if a.payload is None:
        return b
    if b.payload is None:
        return a
    return Subst(a.domain, a.scope, kernel.lub(a.payload, b.payload))


def glb(a: Subst, b: Subst) -> Subst:
    _same(a, b)
    if a.payload is None or b.payload is None:
        return Subst(a.domain, a.scope, None)
    return Subst(a.domain, a.scope, kernel.glb(a.payload, b.payload))


def _step_code(step, index: dict) -> list[int]:
    if isinstance(step, Unify):
        x = index[step.var]
        t = step.term
        if isinstance(t, Var):
            return [kernel.EQ, x, index[t.name]]
        vs = [index[v] for v in term_vars(t)]
        return [kernel.BIND, x, shape_of(t), len(vs)] + vs
    if isinstance(step, Builtin):
        if step.kind == "is":
            vs = [index[v] for v in term_vars(step.args[1])]
            return [kernel.IS, index[step.args[0].name], kernel.INT, len(vs)] + vs
        if step.kind == "fail":
            return [-1]
        for arg in step.args:
            for v in term_vars(arg):
                index[v]  # scope check only
        return []
    raise TypeError(f"amgu expects Unify or Builtin, got {step!r}")


def shape_of(t: Term) -> int:
    if isinstance(t, Int):
        return kernel.INT
    if isinstance(t, Atom):
        return kernel.LST if t.name == "[]" else kernel.ATM
    if isinstance(t, Compound) and t.functor == "." and len(t.args) == 2:
        return kernel.LST
    if isinstance(t, Compound):
        return kernel.STRUCT
    return kernel.ANY


def amgu_steps(a: Subst, steps) -> Subst:
    """Abstractly execute unification/builtin steps, replayed to a local fixed point."""
    if a.payload is None:
        return a
    index = {v: i for i, v in enumerate(a.scope)}
    code: list[int] = []
    try:
        for s in steps:
            part = _step_code(s, index)
            if part == [-1]:
                return Subst(a.domain, a.scope, None)
            code += part
    except KeyError as err:
        raise DomainMismatch(f"step variable {err} outside scope {list(a.scope)}") from None
    state = bytearray(a.payload)
    if not kernel.run_eqs(state, array("i", code), FLAGS[a.domain]):
        return Subst(a.domain, a.scope, None)
    return Subst(a.domain, a.scope, bytes(state))


def amgu(a: Subst, step) -> Subst:
    return amgu_steps(a, [step])


def project(a: Subst, onto) -> Subst:
    onto = tuple(onto)
    missing = set(onto) - set(a.scope)
    if missing:
        raise DomainMismatch(f"cannot project onto variables outside scope: {sorted(missing)}")
    if a.payload is None:
        return Subst(a.domain, onto, None)
    pos = {v: i for i, v in enumerate(a.scope)}
    return Subst(a.domain, onto, bytes(a.payload[pos[v]] for v in onto))


def extend(a: Subst, new_scope) -> Subst:
    new_scope = tuple(new_scope)
    if not set(a.scope) <= set(new_scope):
        raise DomainMismatch("extension scope must contain the current scope")
    if a.payload is None:
        return Subst(a.domain, new_scope, None)
    cur = dict(zip(a.scope, a.payload))
    return Subst(a.domain, new_scope, bytes(cur.get(v, TOP_BYTE) for v in new_scope))


def clause_scope(clause: ChcClause) -> tuple:
    return tuple(f"_V{i}" for i in range(clause.code.nvars))


def call_to_entry(call: Subst, clause: ChcClause) -> Subst:
    if len(call.scope) != clause.pred[1]:
        raise DomainMismatch(f"call pattern of arity {len(call.scope)} for {clause.pred}")
    renamed = Subst(call.domain, clause.head_vars, call.payload)
    return extend(renamed, clause_scope(clause))


def exit_to_success(exit: Subst, clause: ChcClause, call: Subst) -> Subst:
    if len(call.scope) != clause.pred[1]:
        raise DomainMismatch(f"call pattern of arity {len(call.scope)} for {clause.pred}")
    at_head = project(exit, clause.head_vars)
    return glb(Subst(call.domain, call.scope, at_head.payload), call)


# ---------------------------------------------------------------------------
# Properties


@dataclass(frozen=True)
class PropAbstraction:
    abs: Subst
    exact: bool
    problems: tuple = field(default=(), compare=False)


def is_native(lit: Term, domain: str) -> bool:
    f = functor_of(lit)
    if f is None or f[1] != 1 or not isinstance(lit.args[0], Var):
        return False
    flags = FLAGS[domain]
    if f[0] in GROUND_LITERALS:
        return bool(flags & kernel.USE_GROUND)
    if f[0] in TYPE_LITERALS:
        return bool(flags & kernel.USE_TYPES)
    return False


def abstract_props(conj, scope, domain: str) -> PropAbstraction:
    """Abstract a conjunction of property literals over ``scope``.

    Native literals are represented exactly; anything else contributes top and
    makes the abstraction inexact.
    """
    scope = tuple(scope)
    index = {v: i for i, v in enumerate(scope)}
    state = bytearray([TOP_BYTE]) * len(scope)
    exact = True
    problems = []
    bottom = False
    for lit in conj:
        f = functor_of(lit)
        if f is None:
            problems.append(f"property {format_term(lit)} is not a literal")
            exact = False
            continue
        for v in term_vars(lit):
            if v not in index:
                problems.append(f"property {format_term(lit)} mentions {v}, which is not a head variable")
        name, arity = f
        if name in GROUND_LITERALS or name in TYPE_LITERALS:
            if arity != 1:
                problems.append(f"property {name}/{arity} has the wrong arity (expected {name}/1)")
                exact = False
                continue
        if not is_native(lit, domain) or lit.args[0].name not in index:
            exact = False
            continue
        i = index[lit.args[0].name]
        if name in GROUND_LITERALS:
            state[i] |= kernel.G
        else:
            t = state[i] & kernel.TMASK
            want = TYPE_LITERALS[name]
            if t == kernel.ANY or t == want:
                state[i] = (state[i] & kernel.G) | want
            else:
                bottom = True
    payload = None if bottom else bytes(state)
    return PropAbstraction(Subst(domain, scope, payload), exact, tuple(problems))


YES, NO, MAYBE = "yes", "no", "maybe"


def entails_props(a: Subst, p: PropAbstraction) -> str:
    _same(a, p.abs)
    if p.exact and leq(a, p.abs):
        return YES
    if a.payload is not None and glb(a, p.abs).payload is None:
        return NO
    return MAYBE


def select_domain(assertions) -> str:
    """Pick the domain(s) relevant to the properties written in assertions."""
    want_ground = want_types = False
    for a in assertions:
        for lit in tuple(a.pre) + tuple(a.post):
            f = functor_of(lit)
            if f is None or f[1] != 1:
                continue
            if f[0] in GROUND_LITERALS:
                want_ground = True
            elif f[0] in TYPE_LITERALS:
                want_types = True
    if want_ground and want_types:
        return PRODUCT
    if want_types:
        return TYPES
    return MODES


def render(a: Subst, only=None) -> str:
    """Canonical text, e.g. ``ground(X,Y), type(Z)=lst``; ``bottom`` for bottom."""
    if a.payload is None:
        return "bottom"
    keep = set(a.scope if only is None else only)
    ground = [v for v, b in zip(a.scope, a.payload) if v in keep and b & kernel.G]
    typed = [(v, b & kernel.TMASK) for v, b in zip(a.scope, a.payload) if v in keep and b & kernel.TMASK != kernel.ANY]
    parts = []
    if ground:
        parts.append(f"ground({','.join(ground)})")
    parts.extend(f"type({v})={TYPE_NAMES[t]}" for v, t in typed)
    return ", ".join(parts) if parts else "true"


def render_pattern(payload: bytes | None, names) -> str:
    return render(Subst(PRODUCT, tuple(names), payload))
