"""Parsed artifact representations that perturbation operators act on.

Tables are read and written as CSV with a header row (comma-delimited,
RFC-style minimal quoting, LF line endings). Documents use a line-oriented
structured text format:

    #section <title>
    #para
    <span_id><TAB><page><TAB><offset><TAB><text>

Backslash, tab, newline, and carriage return inside titles and span text are
escaped as ``\\\\``, ``\\t``, ``\\n``, ``\\r``. Both writers are canonical, so
equal artifacts serialize to identical bytes. See docs/artifact_formats.md.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterator

_NUMBER_RE = re.compile(r"-?\d+(\.\d+)?")

CELL_EMPTY = "empty"
CELL_NUMBER = "number"
CELL_TEXT = "text"


class InvalidArtifact(Exception):
    """An artifact file does not parse under its documented format."""

    def __init__(self, line_no: int, reason: str) -> None:
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


def format_decimal(value: Decimal) -> str:
    """Plain, exponent-free decimal text with no trailing fraction zeros."""
    text = format(value, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("-0", ""):
        text = "0"
    return text


@dataclass(frozen=True)
class Cell:
    raw: str

    @property
    def value(self) -> Decimal | None:
        if _NUMBER_RE.fullmatch(self.raw):
            return Decimal(self.raw)
        return None

    @property
    def kind(self) -> str:
        if self.raw == "":
            return CELL_EMPTY
        return CELL_NUMBER if self.value is not None else CELL_TEXT


EMPTY_CELL = Cell("")


@dataclass(frozen=True)
class TableArtifact:
    header: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]
    # Provenance citations that deviate from position (cell id -> cited id);
    # populated only by reference-drift corruption, never by parsing.
    provenance_overrides: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.header)

    @staticmethod
    def cell_id(row: int, col: int) -> str:
        return f"R{row}C{col}"

    def cited_id(self, row: int, col: int) -> str:
        position = self.cell_id(row, col)
        return self.provenance_overrides.get(position, position)

    def numeric_cells(self) -> list[tuple[int, int]]:
        """(row, col) of every numeric cell, row-major order."""
        found = []
        for r, row in enumerate(self.rows):
            for c, cell in enumerate(row):
                if cell.kind == CELL_NUMBER:
                    found.append((r, c))
        return found

    def cell_multiset(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for row in self.rows:
            for cell in row:
                counts[cell.raw] = counts.get(cell.raw, 0) + 1
        return counts


def validate_table(table: TableArtifact) -> list[str]:
    problems = []
    for r, row in enumerate(table.rows):
        if len(row) != table.n_cols:
            problems.append(f"row {r} has {len(row)} cells, header has {table.n_cols}")
    return problems


def read_table(text: str) -> TableArtifact:
    reader = csv.reader(io.StringIO(text))
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise InvalidArtifact(reader.line_num, str(exc)) from None
    if not rows:
        raise InvalidArtifact(1, "table is empty; a header row is required")
    header = tuple(rows[0])
    body = []
    for line_no, raw_row in enumerate(rows[1:], start=2):
        if len(raw_row) != len(header):
            raise InvalidArtifact(
                line_no, f"row has {len(raw_row)} cells, header has {len(header)}"
            )
        body.append(tuple(Cell(value) for value in raw_row))
    return TableArtifact(header=header, rows=tuple(body))


def write_table(table: TableArtifact) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(table.header)
    for row in table.rows:
        writer.writerow([cell.raw for cell in row])
    return buffer.getvalue()


@dataclass(frozen=True)
class Span:
    span_id: str
    page: int
    offset: int
    text: str


@dataclass(frozen=True)
class Paragraph:
    spans: tuple[Span, ...]


@dataclass(frozen=True)
class Section:
    title: str
    paragraphs: tuple[Paragraph, ...]


@dataclass(frozen=True)
class DocumentArtifact:
    sections: tuple[Section, ...]

    def spans(self) -> Iterator[tuple[int, int, int, Span]]:
        """(section, paragraph, position, span) in document order."""
        for s, section in enumerate(self.sections):
            for p, paragraph in enumerate(section.paragraphs):
                for k, span in enumerate(paragraph.spans):
                    yield s, p, k, span

    def span_count(self) -> int:
        return sum(1 for _ in self.spans())

    def text(self) -> str:
        return "".join(span.text for _, _, _, span in self.spans())

    def span_ids(self) -> list[str]:
        return [span.span_id for _, _, _, span in self.spans()]


def validate_document(doc: DocumentArtifact) -> list[str]:
    problems = []
    seen: set[str] = set()
    for _, _, _, span in doc.spans():
        if span.span_id in seen:
            problems.append(f"duplicate span id {span.span_id!r}")
        seen.add(span.span_id)
        if span.offset < 0:
            problems.append(f"span {span.span_id!r} has negative offset {span.offset}")
    return problems


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _unescape(text: str, line_no: int) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(text):
            raise InvalidArtifact(line_no, "dangling escape at end of field")
        nxt = text[i + 1]
        mapped = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt)
        if mapped is None:
            raise InvalidArtifact(line_no, f"unknown escape \\{nxt}")
        out.append(mapped)
        i += 2
    return "".join(out)


def read_document(text: str) -> DocumentArtifact:
    sections: list[Section] = []
    title: str | None = None
    paragraphs: list[Paragraph] = []
    spans: list[Span] = []
    in_paragraph = False

    def close_paragraph() -> None:
        nonlocal in_paragraph, spans
        if in_paragraph:
            paragraphs.append(Paragraph(tuple(spans)))
            spans = []
            in_paragraph = False

    def close_section() -> None:
        nonlocal title, paragraphs
        close_paragraph()
        if title is not None:
            sections.append(Section(title, tuple(paragraphs)))
            title = None
            paragraphs = []

    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line:
            continue
        if line.startswith("#section"):
            close_section()
            title = _unescape(line[len("#section"):].strip(), line_no)
        elif line.rstrip() == "#para":
            if title is None:
                raise InvalidArtifact(line_no, "#para outside any #section")
            close_paragraph()
            in_paragraph = True
        else:
            if not in_paragraph:
                raise InvalidArtifact(line_no, "span line outside any #para")
            parts = line.split("\t", 3)
            if len(parts) != 4:
                raise InvalidArtifact(line_no, "span line needs id, page, offset, text")
            span_id, page_text, offset_text, body = parts
            try:
                page = int(page_text)
                offset = int(offset_text)
            except ValueError:
                raise InvalidArtifact(line_no, "page and offset must be integers") from None
            spans.append(Span(_unescape(span_id, line_no), page, offset, _unescape(body, line_no)))
    close_section()
    if not sections:
        raise InvalidArtifact(1, "document has no #section")
    return DocumentArtifact(tuple(sections))


def write_document(doc: DocumentArtifact) -> str:
    lines: list[str] = []
    for section in doc.sections:
        lines.append(f"#section {_escape(section.title)}")
        for paragraph in section.paragraphs:
            lines.append("#para")
            for span in paragraph.spans:
                lines.append(
                    f"{_escape(span.span_id)}\t{span.page}\t{span.offset}\t{_escape(span.text)}"
                )
    return "\n".join(lines) + "\n"
