"""Small shared helpers for the test modules."""

from __future__ import annotations

from pathlib import Path

from verifly.chc import build_program
from verifly.syntax import parse_program

FIXTURES = Path(__file__).parent / "fixtures"


def program_from(text: str, file_id: str = "t.pl", prelude: bool = True):
    ast = parse_program(text, file_id)
    assert not [d for d in ast.syntax_errors if d.severity == "error"], ast.syntax_errors
    return build_program([ast], prelude=prelude)


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def fixture_program(name: str):
    return program_from(fixture_text(name), name)
