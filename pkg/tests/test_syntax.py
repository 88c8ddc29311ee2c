from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fixture_text
from verifly.spans import Span
from verifly.syntax import (
    Atom,
    Compound,
    Int,
    Var,
    format_ast,
    format_term,
    make_list,
    parse_program,
    strip_spans,
    tokenize,
)


def test_pow_listing_parses_into_two_assertions_and_two_clauses():
    ast = parse_program(fixture_text("pow.pl"), "pow.pl")
    assert ast.syntax_errors == []
    assert len(ast.assertions) == 2
    assert len(ast.clauses) == 2
    a = ast.assertions[0]
    assert a.pred == ("pow", 3)
    assert a.status == "check"
    assert [format_term(p) for p in a.pre] == ["int(X)", "even(N)"]
    assert [format_term(p) for p in a.post] == ["P >= 0"]


def test_missing_paren_yields_one_diagnostic_and_no_clause():
    ast = parse_program("p(X :- q(X).", "bad.pl")
    assert ast.clauses == []
    assert len(ast.syntax_errors) == 1
    d = ast.syntax_errors[0]
    assert d.code == "syntax" and d.severity == "error"
    assert (d.span.start_line, d.span.start_col) == (1, 1)


def test_error_recovery_keeps_neighbouring_declarations():
    ast = parse_program(fixture_text("syntax_error.pl"), "s.pl")
    assert [c.head.functor for c in ast.clauses] == ["ok", "also_ok"]
    assert len(ast.syntax_errors) == 1
    assert ast.syntax_errors[0].span.start_line == 2


def test_missing_terminator_is_reported():
    ast = parse_program("p(a).\nq(b)", "t.pl")
    assert len(ast.clauses) == 1
    assert "terminating" in ast.syntax_errors[0].message


def test_lists_and_arithmetic():
    ast = parse_program("p([A, B|T], N) :- N is A * 2 + -3, M = [], q(M).", "t.pl")
    c = ast.clauses[0]
    head = strip_spans(c.head)
    assert head.args[0] == make_list([Var("A"), Var("B")], Var("T"))
    goal = strip_spans(c.body[0])
    assert goal == Compound("is", (Var("N"), Compound("+", (Compound("*", (Var("A"), Int(2))), Int(-3)))))


def test_anonymous_variables_are_distinct_and_fresh():
    ast = parse_program("p(_, _, _1).", "t.pl")
    names = [a.name for a in ast.clauses[0].head.args]
    assert len(set(names)) == 3
    assert names[2] == "_1"


def test_quoted_atoms_and_comments():
    ast = parse_program("% comment\np('hello world', 'it''s'). /* block\ncomment */ q.", "t.pl")
    assert ast.syntax_errors == []
    args = ast.clauses[0].head.args
    assert args[0] == Atom("hello world") and args[1] == Atom("it's")
    assert ast.clauses[1].head == Atom("q")


def test_status_prefix_and_entry():
    ast = parse_program(":- checked pred p(X) : ground(X).\n:- entry p(X) : ground(X).\np(a).", "t.pl")
    assert ast.assertions[0].status == "checked"
    assert ast.entries[0].pred == ("p", 1)


def test_unsupported_directive_is_a_warning():
    ast = parse_program(":- module(foo).\np.", "t.pl")
    assert [d.code for d in ast.syntax_errors] == ["directive.ignored"]
    assert ast.syntax_errors[0].severity == "warning"
    assert len(ast.clauses) == 1


def test_assertion_head_must_have_distinct_variables():
    ast = parse_program(":- pred p(X, X).\n:- pred q(a).", "t.pl")
    assert len(ast.syntax_errors) == 2
    assert ast.assertions == []


def test_builtin_heads_are_rejected():
    ast = parse_program("X = Y.\nA is 1.", "t.pl")
    assert len(ast.syntax_errors) == 2


def test_arithmetic_goal_is_rejected():
    assert parse_program("p :- 1 + 2.", "t.pl").syntax_errors


def test_unknown_character_is_an_error_token():
    toks = tokenize("p(a) ? q.")
    assert any(t.kind == "error" for t in toks)
    assert parse_program("p(a) ? q.").syntax_errors


def test_spans_are_one_based_and_end_exclusive():
    toks = tokenize("foo(X).\n  bar.", "f.pl")
    assert toks[0].span == Span("f.pl", 1, 1, 1, 4)
    bar = [t for t in toks if t.text == "bar"][0]
    assert bar.span == Span("f.pl", 2, 3, 2, 6)


def test_clause_span_covers_the_declaration():
    ast = parse_program("a.\np(X) :-\n    q(X).", "f.pl")
    s = ast.clauses[1].span
    assert (s.start_line, s.start_col, s.end_line, s.end_col) == (2, 1, 3, 10)


# -- round trip of the printer through the parser ---------------------------

_atoms = st.sampled_from(["a", "b", "foo", "[]", "hello world", "X1", "it's"]).map(Atom)
_ints = st.integers(-50, 50).map(Int)
_vars = st.sampled_from(["X", "Y", "Zs", "_A"]).map(Var)


def _compound(children):
    fun = st.sampled_from(["f", "g", "+", "-", "*", "/", "."])
    return st.tuples(fun, st.lists(children, min_size=1, max_size=3)).map(
        lambda fa: Compound(fa[0], tuple(fa[1][:2] if fa[0] in "+-*/." and len(fa[1]) >= 2 else fa[1]))
    )


_terms = st.recursive(_atoms | _ints | _vars, _compound, max_leaves=8)


@settings(max_examples=300, deadline=None)
@given(_terms)
def test_format_then_parse_round_trips(t):
    text = f"p({format_term(t)})."
    ast = parse_program(text, "t.pl")
    assert ast.syntax_errors == [], text
    assert strip_spans(ast.clauses[0].head.args[0]) == t, text


def test_format_ast_round_trips_on_fixtures():
    for name in ("append.pl", "qsort.pl", "pow.pl", "nrev.pl"):
        ast = parse_program(fixture_text(name), name)
        again = parse_program(format_ast(ast), name)
        assert [strip_spans(c.head) for c in ast.clauses] == [strip_spans(c.head) for c in again.clauses]
        assert [tuple(map(strip_spans, c.body)) for c in ast.clauses] == [
            tuple(map(strip_spans, c.body)) for c in again.clauses
        ]
        assert len(again.assertions) == len(ast.assertions)
