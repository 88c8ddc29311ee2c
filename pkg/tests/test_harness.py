from __future__ import annotations

import io
import json
import random

import pytest

from oracles import check_graph_soundness
from verifly.engine import analyze
from verifly.harness import (
    CHAT80,
    CSV_HEADER,
    BenchConfig,
    CorpusSpec,
    Edit,
    EditScript,
    gen_edit_script,
    gen_program,
    program_of,
    run_bench,
    write_csv,
)
from verifly.syntax import parse_program

SMALL = CorpusSpec(seed=1, files=1, clauses_total=10, preds=3, shape="chain")


def test_small_spec_parses_cleanly():
    corpus = gen_program(SMALL)
    for name, text in corpus.sources().items():
        assert parse_program(text, name).syntax_errors == []
    assert corpus.clause_count() == 10
    assert len(corpus.info) == 3


def test_generation_is_deterministic():
    for spec in (SMALL, CorpusSpec(seed=9, files=3, clauses_total=60, preds=12, shape="tree", assertion_density=0.5)):
        assert gen_program(spec).sources() == gen_program(spec).sources()
    assert gen_program(SMALL).sources() != gen_program(CorpusSpec(seed=2, clauses_total=10, preds=3)).sources()


@pytest.mark.parametrize(
    "fields",
    [
        {"clauses_total": 2, "preds": 3},
        {"assertion_density": 1.5},
        {"shape": "ring"},
        {"files": 5, "preds": 3},
        {"preds": 0},
    ],
)
def test_infeasible_specs_are_rejected(fields):
    with pytest.raises(ValueError, match="infeasible"):
        CorpusSpec.from_json(fields)


def test_unknown_spec_fields_are_rejected():
    with pytest.raises(ValueError, match="unknown"):
        CorpusSpec.from_json({"seed": 1, "lines": 5})


def test_spec_loads_from_json(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"seed": 3, "files": 2, "clauses_total": 20, "preds": 5, "shape": "dense",
                                "assertion_density": 0.4}))
    assert CorpusSpec.load(str(path)) == CorpusSpec(3, 2, 20, 5, "dense", 0.4)


@pytest.mark.parametrize("shape", ["chain", "tree", "dense"])
def test_every_shape_is_analyzable_and_sound(shape):
    spec = CorpusSpec(seed=4, files=2, clauses_total=24, preds=8, shape=shape, assertion_density=0.5)
    corpus = gen_program(spec)
    g = analyze(program_of(corpus))
    assert g.nodes
    problems = check_graph_soundness(g, list(corpus.sources().values()), random.Random(0), limit=10, max_depth=5)
    assert problems == []


def test_chat80_mirror_has_the_intended_size():
    corpus = gen_program(CHAT80)
    sources = corpus.sources()
    assert len(sources) == 27
    lines = sum(t.count("\n") for t in sources.values())
    assert 5000 <= lines <= 5600
    assert corpus.clause_count() == 4800


def test_edit_scripts_are_deterministic_and_applicable():
    corpus = gen_program(CorpusSpec(seed=5, files=2, clauses_total=30, preds=6, shape="dense", assertion_density=0.5))
    a = gen_edit_script(17, corpus, 25)
    assert a == gen_edit_script(17, corpus, 25)
    assert len(a.edits) == 25
    state = corpus
    for e in a.edits:
        state = state.apply(e)
        for name, text in state.sources().items():
            assert parse_program(text, name).syntax_errors == []


def test_edit_script_on_empty_program_is_rejected():
    corpus = gen_program(SMALL)
    empty = type(corpus)(corpus.spec, (("f.pl", ()),), ())
    with pytest.raises(ValueError):
        gen_edit_script(1, empty)


def test_inapplicable_edit_is_rejected():
    corpus = gen_program(SMALL)
    with pytest.raises(ValueError):
        corpus.apply(Edit("delete_clause", corpus.info[0].name, 99))
    with pytest.raises(ValueError):
        corpus.apply(Edit("edit_assertion", None, 0, ":- pred x."))


def test_empty_script_gives_header_only_csv():
    corpus = gen_program(SMALL)
    rows = run_bench(corpus, [EditScript(1, ())], BenchConfig(repetitions=1))
    assert rows == []
    buf = io.StringIO()
    write_csv(rows, buf)
    assert buf.getvalue() == ",".join(CSV_HEADER) + "\n"


def test_assertion_only_script_recomputes_nothing():
    corpus = gen_program(CorpusSpec(seed=6, files=2, clauses_total=40, preds=10, shape="tree", assertion_density=0.5))
    script = gen_edit_script(3, corpus, 5, kinds=("edit_assertion",))
    rows = run_bench(corpus, [script], BenchConfig(repetitions=1))
    assert len(rows) == 5
    assert all(r.nodes_recomputed == 0 and r.graphs_equal for r in rows)


def test_bench_rows_are_all_equal_and_csv_formatted(tmp_path):
    corpus = gen_program(CorpusSpec(seed=7, files=3, clauses_total=60, preds=15, shape="dense", assertion_density=0.3))
    scripts = [gen_edit_script(i, corpus, 6) for i in range(3)]
    rows = run_bench(corpus, scripts, BenchConfig(repetitions=1))
    assert len(rows) == 18 and all(r.graphs_equal for r in rows)
    out = tmp_path / "bench.csv"
    write_csv(rows, str(out))
    lines = out.read_text().splitlines()
    assert lines[0] == "edit_kind,scratch_ms,incremental_ms,speedup,nodes_reused,nodes_recomputed,graphs_equal"
    assert len(lines) == 19
    assert all(line.endswith(",true") for line in lines[1:])
