from __future__ import annotations

import random

import pytest

from helpers import fixture_program, fixture_text, program_from
from oracles import check_graph_soundness
from programs import RandomProgram
from verifly import engine, kernel
from verifly.domains import MODES, PRODUCT, TYPES, Subst, leq
from verifly.engine import CancelToken, Cancelled, analyze, entries_of
from verifly.snapshot import save_snapshot

APP = "app([], Y, Y).\napp([X|Xs], Y, [X|Z]) :- app(Xs, Y, Z).\n"


def test_app_with_ground_entry_gives_a_single_ground_node():
    prog = program_from(":- entry app(X, Y, Z) : (ground(X), ground(Y)).\n" + APP, prelude=False)
    g = analyze(prog, domain=PRODUCT)
    assert len(g.nodes) == 1
    (key,) = g.nodes
    succ = g.success_subst(key)
    assert succ.ground == {"v1", "v2", "v3"}
    # app([], a, Z) succeeds with Z = a, so Z is not necessarily a list here
    assert succ.types["v3"] == "any"
    assert check_graph_soundness(g, [APP], random.Random(0)) == []


def test_app_with_list_entry_infers_a_list_result():
    prog = program_from(":- entry app(X, Y, Z) : (ground(X), ground(Y), list(Y)).\n" + APP, prelude=False)
    g = analyze(prog, domain=PRODUCT)
    (key,) = g.nodes
    succ = g.success_subst(key)
    assert succ.ground == {"v1", "v2", "v3"} and succ.types["v3"] == "lst"


def test_bottom_entry_has_bottom_success_and_no_arcs():
    prog = program_from(APP, prelude=False)
    entries = [(("app", 3), Subst.bottom(MODES, ("v1", "v2", "v3")))]
    g = analyze(prog, entries=entries, domain=MODES)
    assert [n.success for n in g.nodes.values()] == [None]
    assert g.arcs == {}


def test_nonrecursive_chain_recomputes_each_node_once():
    g = analyze(program_from("p :- q.\nq :- r.\nr.", prelude=False), domain=MODES)
    assert len(g.nodes) == 3
    assert len(g.dep_arcs()) == 2
    assert all(n.success == b"" for n in g.nodes.values())
    assert g.stats.recomputations == 3


def test_entries_of():
    prog = program_from(":- entry app(X, Y, Z) : (ground(X), ground(Y)).\n" + APP, prelude=False)
    ((pred, call),) = entries_of(prog, PRODUCT)
    assert pred == ("app", 3) and call.ground == {"X", "Y"}
    assert all(t == "any" for t in call.types.values())
    implicit = program_from("main :- app([], [], _).\n" + APP, prelude=False)
    assert [p for p, _ in entries_of(implicit, MODES)] == [("main", 0)]
    assert entries_of(program_from("", prelude=False), MODES) == []


def test_entry_for_undefined_predicate_is_reported():
    prog = program_from(":- entry nope(X) : ground(X).\n" + APP, prelude=False)
    diags = []
    assert entries_of(prog, MODES, diags) == []
    assert [d.code for d in diags] == ["entry.unknown"]


def test_unknown_callee_contributes_top():
    prog = program_from(":- entry p(X) : ground(X).\np(X) :- mystery(X, Y), Y = a.", prelude=False)
    g = analyze(prog, domain=MODES)
    (node,) = g.nodes.values()
    assert node.success is not None
    assert sum(len(v) for v in g.unknown.values()) == 1


def test_multivariance_keeps_distinct_calling_situations():
    text = ":- entry main.\nmain :- X = a, app(X, Y, Z), app(Q, R, S).\n" + APP
    g = analyze(program_from(text, prelude=False), domain=MODES)
    calls = {n.key[1] for n in g.nodes_of(("app", 3))}
    assert len(calls) >= 2


def test_renamed_identical_calls_share_one_node():
    text = ":- entry main.\nmain :- app([], A, B), app([], C, D).\n" + APP
    g = analyze(program_from(text, prelude=False), domain=MODES)
    assert len(g.nodes_of(("app", 3))) == 1


def test_graph_closure_and_reachability():
    for name in ("nrev.pl", "qsort.pl", "append.pl", "pow.pl"):
        g = analyze(fixture_program(name))
        for arc in g.dep_arcs():
            assert arc.source[0] in g.nodes and arc.target in g.nodes
        reached = set(g.entry_keys)
        todo = list(reached)
        while todo:
            k = todo.pop()
            for arc in g.dep_arcs():
                if arc.source[0] == k and arc.target not in reached:
                    reached.add(arc.target)
                    todo.append(arc.target)
        assert reached == set(g.nodes)


def test_every_call_step_has_an_arc():
    g = analyze(fixture_program("nrev.pl"))
    prog = fixture_program("nrev.pl")
    for (key, cid), targets in g.arcs.items():
        if g.nodes[key].success is None:
            continue
        clause = next(c for c in prog.preds[key[0]] if c.clause_id == cid)
        calls = [s for s in clause.body if type(s).__name__ == "Call"]
        assert len(targets) + len(g.unknown.get((key, cid), {})) <= len(calls)


def test_success_updates_form_an_ascending_chain(monkeypatch):
    history: dict = {}
    original = engine.Solver._join

    def spy(self, node, exit):
        original(self, node, exit)
        history.setdefault(node.key, []).append(node.success)

    monkeypatch.setattr(engine.Solver, "_join", spy)
    for name in ("nrev.pl", "qsort.pl"):
        g = analyze(fixture_program(name))
        for key, chain in history.items():
            for a, b in zip(chain, chain[1:]):
                assert leq(Subst(g.domain, tuple(range(len(a or b or b""))), a),
                           Subst(g.domain, tuple(range(len(a or b or b""))), b))
        history.clear()


def test_recursion_does_not_create_unbounded_nodes():
    text = ":- entry p(X, Y).\np(X, Y) :- p(f(X), Y).\np(X, X).\n"
    for domain in (MODES, TYPES, PRODUCT):
        g = analyze(program_from(text, prelude=False), domain=domain)
        assert len(g.nodes) <= 32


def test_analysis_is_deterministic():
    for name in ("nrev.pl", "qsort.pl"):
        a = analyze(fixture_program(name))
        b = analyze(fixture_program(name))
        assert save_snapshot(a) == save_snapshot(b)


def test_cancellation_raises_before_work():
    token = CancelToken()
    token.cancel()
    with pytest.raises(Cancelled):
        analyze(fixture_program("nrev.pl"), cancel=token)


def test_trace_reports_recomputations():
    lines = []
    g = analyze(program_from("p :- q.\nq :- r.\nr.", prelude=False), domain=MODES, trace=lines.append)
    assert len(lines) == g.stats.recomputations
    assert all(line.startswith("RECOMP ") for line in lines)


def test_python_fallback_gives_the_same_graph(monkeypatch):
    prog = fixture_program("qsort.pl")
    compiled = save_snapshot(analyze(prog))
    py = kernel.backends()["python"]
    for name in ("run_eqs", "project", "meet_at", "lub", "glb", "leq"):
        monkeypatch.setattr(kernel, name, getattr(py, name))
    assert save_snapshot(analyze(fixture_program("qsort.pl"))) == compiled


@pytest.mark.parametrize("name", ["append.pl", "append_open_tail.pl", "nrev.pl", "qsort.pl", "pow.pl", "first_false.pl"])
@pytest.mark.parametrize("domain", [MODES, TYPES, PRODUCT])
def test_fixture_soundness(name, domain):
    g = analyze(fixture_program(name), domain=domain)
    assert check_graph_soundness(g, [fixture_text(name)], random.Random(1), limit=40) == []


@pytest.mark.parametrize("seed", range(25))
def test_random_program_soundness(seed):
    rng = random.Random(5000 + seed)
    rp = RandomProgram(rng, max_clauses=10, entries=True)
    for domain in (MODES, PRODUCT):
        g = analyze(rp.program(), domain=domain)
        assert check_graph_soundness(g, [rp.text()], rng, limit=20, max_depth=5) == []


def test_oracle_detects_an_unsound_graph():
    g = analyze(fixture_program("append_open_tail.pl"), domain=PRODUCT)
    for node in g.nodes.values():
        if node.success is not None:
            node.success = bytes([kernel.G | kernel.INT]) * len(node.success)
    problems = check_graph_soundness(g, [fixture_text("append_open_tail.pl")], random.Random(0))
    assert problems
