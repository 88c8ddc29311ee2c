"""Tokenizer, parser and pretty-printer for the Horn-clause source language.

The language is a small operator-fixed Prolog subset::

    app([], Ys, Ys).
    app([X|Xs], Ys, [X|Zs]) :- app(Xs, Ys, Zs).
    :- pred app(X, Y, Z) : (ground(X), ground(Y)) => ground(Z).
    :- entry app(X, Y, Z) : (ground(X), ground(Y)).

Parsing never aborts: a malformed declaration is skipped up to its
terminating ``.`` and reported as a ``syntax`` diagnostic.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .spans import Diagnostic, Span

# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Atom:
    name: str
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Int:
    value: int
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, slots=True)
class Compound:
    functor: str
    args: tuple
    span: Span | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.args:
            raise ValueError("compound terms need at least one argument")

    @property
    def arity(self) -> int:
        return len(self.args)


Term = Union[Var, Atom, Int, Compound]

NIL = Atom("[]")


def make_list(items, tail: Term = NIL) -> Term:
    out = tail
    for item in reversed(list(items)):
        out = Compound(".", (item, out))
    return out


def term_vars(t: Term, acc: list[str] | None = None) -> list[str]:
    """Variable names of ``t`` in first-occurrence order, without repeats."""
    if acc is None:
        acc = []
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            if cur.name not in acc:
                acc.append(cur.name)
        elif isinstance(cur, Compound):
            stack.extend(reversed(cur.args))
    return acc


def strip_spans(t: Term) -> Term:
    if isinstance(t, Var):
        return Var(t.name)
    if isinstance(t, Atom):
        return Atom(t.name)
    if isinstance(t, Int):
        return Int(t.value)
    return Compound(t.functor, tuple(strip_spans(a) for a in t.args))


RELOPS = ("=", "is", "<", ">", "=<", ">=", "=:=", "=\\=")
COMPARISONS = ("<", ">", "=<", ">=", "=:=", "=\\=")
ARITH_OPS = ("+", "-", "*", "/")
BUILTIN_FUNCTORS = frozenset(RELOPS + ARITH_OPS + (",",))


def functor_of(t: Term) -> tuple[str, int] | None:
    if isinstance(t, Atom):
        return (t.name, 0)
    if isinstance(t, Compound):
        return (t.functor, t.arity)
    return None


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class ClauseDecl:
    head: Term
    body: tuple
    span: Span = field(compare=False)


@dataclass(frozen=True)
class AssertionDecl:
    status: str
    head: Term
    pre: tuple
    post: tuple
    span: Span = field(compare=False)

    @property
    def pred(self) -> tuple[str, int]:
        return functor_of(self.head)


@dataclass(frozen=True)
class EntryDecl:
    head: Term
    pre: tuple
    span: Span = field(compare=False)

    @property
    def pred(self) -> tuple[str, int]:
        return functor_of(self.head)


@dataclass
class SourceAst:
    file_id: str
    clauses: list[ClauseDecl] = field(default_factory=list)
    assertions: list[AssertionDecl] = field(default_factory=list)
    entries: list[EntryDecl] = field(default_factory=list)
    syntax_errors: list[Diagnostic] = field(default_factory=list)


STATUSES = ("check", "checked", "false")

# ---------------------------------------------------------------------------
# Tokens


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # atom var int punct op end error
    text: str
    span: Span
    value: object = None


_TOKEN_RE = re.compile(
    r"""
     (?P<ws>\s+)
    |(?P<comment>%[^\n]*)
    |(?P<block>/\*.*?\*/)
    |(?P<var>[A-Z_][A-Za-z0-9_]*)
    |(?P<atom>[a-z][A-Za-z0-9_]*)
    |(?P<int>[0-9]+)
    |(?P<qatom>'(?:[^'\\\n]|\\.|'')*')
    |(?P<punct>[()\[\]|,])
    |(?P<sym>[+\-*/\\<>=:.]+)
    |(?P<error>.)
    """,
    re.VERBOSE | re.DOTALL,
)

_SOLO_SYMBOLS = frozenset(RELOPS + ARITH_OPS + (":-", ":", "=>"))


def _unquote(text: str) -> str:
    body = text[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            out.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
            i += 2
        elif ch == "'" and body[i + 1 : i + 2] == "'":
            out.append("'")
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _LineIndex:
    def __init__(self, text: str) -> None:
        self.starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def pos(self, offset: int) -> tuple[int, int]:
        line = bisect.bisect_right(self.starts, offset) - 1
        return line + 1, offset - self.starts[line] + 1


def tokenize(text: str, file_id: str = "<input>") -> list[Token]:
    """Split ``text`` into tokens. Whitespace and comments are dropped.

    Characters outside the lexical grammar become ``error`` tokens.
    """
    starts = _LineIndex(text).starts
    nlines = len(starts)
    line = 0  # index into starts of the line holding the current offset
    tokens: list[Token] = []
    append = tokens.append
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        if kind == "ws" or kind == "comment" or kind == "block":
            continue
        lexeme = m.group()
        start, end = m.span()
        while line + 1 < nlines and starts[line + 1] <= start:
            line += 1
        sl, sc = line + 1, start - starts[line] + 1
        el = line
        while el + 1 < nlines and starts[el + 1] <= end - 1:
            el += 1
        ec = end - starts[el] + 1
        el += 1
        span = Span(file_id, sl, sc, el, ec)
        if kind == "int":
            append(Token("int", lexeme, span, int(lexeme)))
        elif kind == "qatom":
            append(Token("atom", lexeme, span, _unquote(lexeme)))
        elif kind == "atom":
            append(Token("atom", lexeme, span, lexeme))
        elif kind == "sym":
            if lexeme == ".":
                append(Token("end", lexeme, span))
            elif lexeme in _SOLO_SYMBOLS:
                append(Token("op", lexeme, span))
            elif lexeme.endswith(".") and lexeme[:-1] in _SOLO_SYMBOLS:
                # "X = a=." style typo: keep the terminator so recovery still works
                cut = Span(file_id, sl, sc, el, ec - 1)
                append(Token("op", lexeme[:-1], cut))
                append(Token("end", ".", Span(file_id, el, ec - 1, el, ec)))
            else:
                append(Token("error", lexeme, span))
        else:
            append(Token(kind, lexeme, span))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class ParseError(Exception):
    def __init__(self, message: str, token: Token | None) -> None:
        super().__init__(message)
        self.token = token


class _DeclParser:
    def __init__(self, tokens: list[Token], end_span: Span) -> None:
        self.toks = tokens
        self.pos = 0
        self.end_span = end_span
        used = {t.text for t in tokens if t.kind == "var"}
        self._fresh = 0
        self._used = used

    # -- token helpers
    def peek(self, k: int = 0) -> Token | None:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of declaration", None)
        self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind or tok.text != text:
            found = "end of declaration" if tok is None else repr(tok.text)
            raise ParseError(f"expected {text!r} but found {found}", tok)
        self.pos += 1
        return tok

    def done(self) -> bool:
        return self.pos >= len(self.toks)

    def anon(self) -> str:
        while True:
            self._fresh += 1
            name = f"_{self._fresh}"
            if name not in self._used:
                self._used.add(name)
                return name

    # -- grammar
    def conj(self) -> Term:
        left = self.goal()
        if self.at("punct", ","):
            self.next()
            right = self.conj()
            return Compound(",", (left, right), _cover(left, right))
        return left

    def conj_list(self) -> list[Term]:
        return flatten_conj(self.conj())

    def goal(self) -> Term:
        left = self.expr()
        tok = self.peek()
        if tok is not None and (
            (tok.kind == "op" and tok.text in RELOPS) or (tok.kind == "atom" and tok.text == "is" and tok.value == "is")
        ):
            self.next()
            right = self.expr()
            return Compound(tok.text, (left, right), _cover(left, right))
        return left

    def expr(self) -> Term:
        left = self.mul()
        while (tok := self.peek()) is not None and tok.kind == "op" and tok.text in ("+", "-"):
            self.pos += 1
            right = self.mul()
            left = Compound(tok.text, (left, right), _cover(left, right))
        return left

    def mul(self) -> Term:
        left = self.factor()
        while (tok := self.peek()) is not None and tok.kind == "op" and tok.text in ("*", "/"):
            self.pos += 1
            right = self.factor()
            left = Compound(tok.text, (left, right), _cover(left, right))
        return left

    def factor(self) -> Term:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text == "-":
            self.next()
            nxt = self.peek()
            if nxt is not None and nxt.kind == "int":
                self.next()
                return Int(-nxt.value, tok.span.cover(nxt.span))
            operand = self.factor()
            return Compound("-", (operand,), tok.span.cover(operand.span))
        return self.primary()

    def primary(self) -> Term:
        tok = self.next()
        if tok.kind == "var":
            name = self.anon() if tok.text == "_" else tok.text
            return Var(name, tok.span)
        if tok.kind == "int":
            return Int(tok.value, tok.span)
        if tok.kind == "atom":
            if self.at("punct", "("):
                self.next()
                args = [self.goal()]
                while self.at("punct", ","):
                    self.next()
                    args.append(self.goal())
                close = self.expect("punct", ")")
                return Compound(tok.value, tuple(args), tok.span.cover(close.span))
            return Atom(tok.value, tok.span)
        if tok.kind == "punct" and tok.text == "[":
            if self.at("punct", "]"):
                close = self.next()
                return Atom("[]", tok.span.cover(close.span))
            items = [self.goal()]
            while self.at("punct", ","):
                self.next()
                items.append(self.goal())
            tail: Term = NIL
            if self.at("punct", "|"):
                self.next()
                tail = self.goal()
            close = self.expect("punct", "]")
            span = tok.span.cover(close.span)
            out = tail
            for item in reversed(items):
                out = Compound(".", (item, out), span)
            return out
        if tok.kind == "punct" and tok.text == "(":
            inner = self.conj()
            self.expect("punct", ")")
            return inner
        if tok.kind == "error":
            raise ParseError(f"unexpected character {tok.text!r}", tok)
        raise ParseError(f"unexpected {tok.text!r}", tok)


def _cover(a: Term, b: Term) -> Span | None:
    if a.span is None or b.span is None:
        return a.span or b.span
    return a.span.cover(b.span)


def flatten_conj(t: Term) -> list[Term]:
    out = []
    while isinstance(t, Compound) and t.functor == "," and t.arity == 2:
        out.extend(flatten_conj(t.args[0]))
        t = t.args[1]
    out.append(t)
    return out


def _check_head(head: Term, what: str) -> None:
    if isinstance(head, (Var, Int)):
        raise ParseError(f"{what} head must be an atom or compound term", None)
    name, arity = functor_of(head)
    if name in BUILTIN_FUNCTORS and arity == 2 or name == "-" and arity == 1:
        raise ParseError(f"cannot define builtin {name}/{arity}", None)


def _check_goal(goal: Term) -> None:
    if isinstance(goal, (Var, Int)):
        raise ParseError("body goal is not callable", None)
    if isinstance(goal, Compound) and goal.functor in ARITH_OPS and (goal.arity == 2 or goal.functor == "-"):
        raise ParseError(f"arithmetic expression used as a goal: {format_term(goal)}", None)


def _check_spec_head(head: Term) -> None:
    _check_head(head, "assertion")
    if isinstance(head, Compound):
        names = [a.name for a in head.args if isinstance(a, Var)]
        if len(names) != head.arity or len(set(names)) != head.arity:
            raise ParseError("assertion head arguments must be distinct variables", None)


def _split_declarations(tokens: list[Token]) -> Iterator[tuple[list[Token], Token | None]]:
    start = 0
    for i, tok in enumerate(tokens):
        if tok.kind == "end":
            yield tokens[start:i], tok
            start = i + 1
    if start < len(tokens):
        yield tokens[start:], None


def parse_program(text: str, file_id: str = "<input>") -> SourceAst:
    ast = SourceAst(file_id)
    for toks, end in _split_declarations(tokenize(text, file_id)):
        if not toks:
            if end is not None:
                ast.syntax_errors.append(Diagnostic(end.span, "error", "syntax", "empty declaration"))
            continue
        decl_span = toks[0].span.cover(end.span if end is not None else toks[-1].span)
        if end is None:
            ast.syntax_errors.append(
                Diagnostic(decl_span, "error", "syntax", "declaration is missing its terminating '.'")
            )
            continue
        try:
            _parse_declaration(_DeclParser(toks, end.span), decl_span, ast)
        except ParseError as err:
            ast.syntax_errors.append(Diagnostic(decl_span, "error", "syntax", f"syntax error: {err}"))
    return ast


def _parse_declaration(p: _DeclParser, span: Span, ast: SourceAst) -> None:
    if p.at("op", ":-"):
        p.next()
        tok = p.peek()
        if tok is None or tok.kind != "atom":
            raise ParseError("expected a directive name", tok)
        status = None
        if tok.value in STATUSES and p.peek(1) is not None and p.peek(1).kind == "atom" and p.peek(1).value == "pred":
            status = p.next().value
            tok = p.peek()
        if tok.value == "pred":
            p.next()
            head = p.goal()
            _check_spec_head(head)
            pre: list[Term] = []
            post: list[Term] = []
            if p.at("op", ":"):
                p.next()
                pre = p.conj_list()
            if p.at("op", "=>"):
                p.next()
                post = p.conj_list()
            _finish(p)
            ast.assertions.append(AssertionDecl(status or "check", head, tuple(pre), tuple(post), span))
        elif tok.value == "entry" and status is None:
            p.next()
            head = p.goal()
            _check_spec_head(head)
            pre = []
            if p.at("op", ":"):
                p.next()
                pre = p.conj_list()
            _finish(p)
            ast.entries.append(EntryDecl(head, tuple(pre), span))
        else:
            ast.syntax_errors.append(
                Diagnostic(span, "warning", "directive.ignored", f"unsupported directive {tok.text!r} ignored")
            )
        return
    head = p.goal()
    _check_head(head, "clause")
    body: list[Term] = []
    if p.at("op", ":-"):
        p.next()
        body = p.conj_list()
        for g in body:
            _check_goal(g)
    _finish(p)
    ast.clauses.append(ClauseDecl(head, tuple(body), span))


def _finish(p: _DeclParser) -> None:
    if not p.done():
        tok = p.peek()
        raise ParseError(f"unexpected {tok.text!r}", tok)


# ---------------------------------------------------------------------------
# Pretty-printing

_PLAIN_ATOM = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
_INFIX = {",": (1000, "xfy"), "+": (500, "yfx"), "-": (500, "yfx"), "*": (400, "yfx"), "/": (400, "yfx")}
_INFIX.update({op: (700, "xfx") for op in RELOPS})


def format_atom(name: str) -> str:
    if _PLAIN_ATOM.match(name) or name == "[]":
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n").replace("\t", "\\t")
    return f"'{escaped}'"


def format_term(t: Term, maxprec: int = 999) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Int):
        return str(t.value)
    if isinstance(t, Atom):
        return format_atom(t.name)
    if t.functor == "." and t.arity == 2:
        items = []
        cur: Term = t
        while isinstance(cur, Compound) and cur.functor == "." and cur.arity == 2:
            items.append(format_term(cur.args[0]))
            cur = cur.args[1]
        inner = ", ".join(items)
        if cur == NIL:
            return f"[{inner}]"
        return f"[{inner}|{format_term(cur)}]"
    if t.arity == 2 and t.functor in _INFIX:
        prec, kind = _INFIX[t.functor]
        lp = prec if kind == "yfx" else prec - 1
        rp = prec if kind == "xfy" else prec - 1
        sep = ", " if t.functor == "," else f" {t.functor} "
        text = format_term(t.args[0], lp) + sep + format_term(t.args[1], rp)
        return f"({text})" if prec > maxprec else text
    if t.functor == "-" and t.arity == 1:
        return f"-({format_term(t.args[0], 1200)})"
    args = ", ".join(format_term(a) for a in t.args)
    return f"{format_atom(t.functor)}({args})"


def _format_conj(goals) -> str:
    text = ", ".join(format_term(g) for g in goals)
    return f"({text})" if len(goals) > 1 else text


def format_decl(decl) -> str:
    if isinstance(decl, ClauseDecl):
        head = format_term(decl.head)
        if not decl.body:
            return f"{head}."
        return f"{head} :- {', '.join(format_term(g) for g in decl.body)}."
    if isinstance(decl, AssertionDecl):
        status = "" if decl.status == "check" else f"{decl.status} "
        out = f":- {status}pred {format_term(decl.head)}"
        if decl.pre:
            out += f" : {_format_conj(decl.pre)}"
        if decl.post:
            out += f" => {_format_conj(decl.post)}"
        return out + "."
    if isinstance(decl, EntryDecl):
        out = f":- entry {format_term(decl.head)}"
        if decl.pre:
            out += f" : {_format_conj(decl.pre)}"
        return out + "."
    raise TypeError(f"not a declaration: {decl!r}")


def format_ast(ast: SourceAst) -> str:
    lines = [format_decl(d) for d in ast.assertions]
    lines += [format_decl(d) for d in ast.entries]
    lines += [format_decl(d) for d in ast.clauses]
    return "\n".join(lines) + ("\n" if lines else "")
