"""Source spans and diagnostics shared by every stage."""

from __future__ import annotations

from dataclasses import dataclass

SEVERITIES = ("error", "warning", "info", "verified")


@dataclass(frozen=True, order=True)
class Span:
    """A region of a source file.

    Lines and columns are 1-based. ``end_col`` is the column just past the
    last character, so an empty span has ``start == end``.
    """

    file_id: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if (self.start_line, self.start_col) > (self.end_line, self.end_col):
            raise ValueError(f"span starts after it ends: {self}")

    def contains(self, other: Span) -> bool:
        return (
            self.file_id == other.file_id
            and (self.start_line, self.start_col) <= (other.start_line, other.start_col)
            and (other.end_line, other.end_col) <= (self.end_line, self.end_col)
        )

    def cover(self, other: Span) -> Span:
        start = min((self.start_line, self.start_col), (other.start_line, other.start_col))
        end = max((self.end_line, self.end_col), (other.end_line, other.end_col))
        return Span(self.file_id, start[0], start[1], end[0], end[1])

    @classmethod
    def point(cls, file_id: str, line: int = 1, col: int = 1) -> Span:
        return cls(file_id, line, col, line, col)


@dataclass(frozen=True)
class Diagnostic:
    span: Span
    severity: str
    code: str
    message: str

    def __post_init__(self) -> None:
        if self.severity not in SEVERITIES:
            raise ValueError(f"unknown severity {self.severity!r}")

    def sort_key(self) -> tuple:
        s = self.span
        return (s.file_id, s.start_line, s.start_col, s.end_line, s.end_col, self.code, self.message)

    def to_json(self) -> dict:
        s = self.span
        return {
            "file": s.file_id,
            "line_start": s.start_line,
            "col_start": s.start_col,
            "line_end": s.end_line,
            "col_end": s.end_col,
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
        }

    def render(self) -> str:
        s = self.span
        return f"{s.file_id}:{s.start_line}:{s.start_col}: [{self.severity}] {self.code}: {self.message}"
