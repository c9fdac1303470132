"""Seeded, deterministic perturbation operators over parsed artifacts.

The catalog spans two modalities. Tabular operators act on CSV-backed tables;
document operators act on span-structured documents. Every application returns
the perturbed artifact together with a replayable PerturbationRecord: applying
``record.op_name`` with ``record.params`` and ``record.seed`` to the original
artifact reproduces the perturbed artifact byte for byte.

Randomness comes exclusively from the counter-based generator in
``trace_contam.rng``, so results are identical across platforms and runs.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..artifacts import DocumentArtifact, TableArtifact
from ..records import MODALITY_DOCUMENT, MODALITY_TABULAR, PerturbationRecord
from ..rng import CounterRng
from . import document as _document
from . import tabular as _tabular
from .errors import (
    InapplicableOperator,
    InvalidParams,
    PerturbationError,
    UnknownOperator,
)

__all__ = [
    "CatalogEntry",
    "InapplicableOperator",
    "InvalidParams",
    "PerturbationError",
    "UnknownOperator",
    "apply_document",
    "apply_tabular",
    "catalog",
    "default_params",
]


@dataclass(frozen=True)
class CatalogEntry:
    op_name: str
    modality: str
    param_schema: dict  # name -> {"type": ..., "default": ..., "help": ...}
    summary: str

    def defaults(self) -> dict:
        return {
            name: spec["default"]
            for name, spec in self.param_schema.items()
            if spec.get("default") is not None
        }


_TABULAR_CATALOG = [
    CatalogEntry("column_swap", MODALITY_TABULAR, {},
                 "exchange two columns end to end"),
    CatalogEntry("label_corrupt", MODALITY_TABULAR, {},
                 "character-level edit of one header label"),
    CatalogEntry("data_type_corrupt", MODALITY_TABULAR,
                 {"cells": {"type": "int", "default": 3, "help": "numeric cells to corrupt"}},
                 "inject non-numeric symbols into numeric cells"),
    CatalogEntry("row_duplicate", MODALITY_TABULAR, {},
                 "duplicate one row adjacently"),
    CatalogEntry("irrelevant_columns", MODALITY_TABULAR,
                 {"count": {"type": "int", "default": 2, "help": "filler columns to append"}},
                 "append filler columns, originals untouched"),
    CatalogEntry("unit_change", MODALITY_TABULAR,
                 {"factor": {"type": "float", "default": 1000, "help": "multiplier"}},
                 "rescale one numeric column without updating its label"),
    CatalogEntry("misalignment", MODALITY_TABULAR, {},
                 "shift a contiguous block by one row/column"),
    CatalogEntry("header_drift", MODALITY_TABULAR, {},
                 "swap header labels or promote a footer row into the header"),
    CatalogEntry("numeric_noise", MODALITY_TABULAR,
                 {"magnitude": {"type": "float", "default": 0.2, "help": "relative noise bound"},
                  "cells": {"type": "int", "default": 3, "help": "cells to noise"}},
                 "multiplicative noise on numeric cells"),
    CatalogEntry("cell_reference_drift", MODALITY_TABULAR,
                 {"cells": {"type": "int", "default": 3, "help": "citations to shift"}},
                 "values intact, provenance cell ids shifted one row"),
]

_DOCUMENT_CATALOG = [
    CatalogEntry("ocr_noise", MODALITY_DOCUMENT,
                 {"rate": {"type": "float", "default": 0.02, "help": "fraction of eligible chars"}},
                 "character confusions from a fixed map (0/O, 1/l, rn/m, 5/S)"),
    CatalogEntry("number_corruption", MODALITY_DOCUMENT,
                 {"tokens": {"type": "int", "default": 3, "help": "numeric tokens to perturb"},
                  "factor": {"type": "float", "default": None, "help": "multiplier; digit swap if unset"}},
                 "perturb numeric/date tokens"),
    CatalogEntry("text_redaction", MODALITY_DOCUMENT, {},
                 "replace one span with an equal-length redaction marker"),
    CatalogEntry("paragraph_shuffle", MODALITY_DOCUMENT,
                 {"count": {"type": "int", "default": 3, "help": "window of adjacent paragraphs"}},
                 "permute adjacent paragraphs"),
    CatalogEntry("encoding_error", MODALITY_DOCUMENT,
                 {"spans": {"type": "int", "default": 1, "help": "spans to garble"}},
                 "substitute character runs with replacement characters"),
    CatalogEntry("section_removal", MODALITY_DOCUMENT, {},
                 "delete one section"),
    CatalogEntry("span_omission", MODALITY_DOCUMENT, {},
                 "delete one qualifier span"),
    CatalogEntry("snippet_insertion", MODALITY_DOCUMENT,
                 {"snippet": {"type": "str", "default": None, "help": "text to insert; bank if unset"}},
                 "insert a plausible but false snippet next to a span"),
    CatalogEntry("citation_pointer_shift", MODALITY_DOCUMENT,
                 {"spans": {"type": "int", "default": 3, "help": "spans whose offsets shift"}},
                 "text unchanged, span offsets shifted by one"),
    CatalogEntry("tool_truncation", MODALITY_DOCUMENT,
                 {"fraction": {"type": "float", "default": 0.6, "help": "leading fraction kept"}},
                 "keep only the leading fraction of spans"),
]

_TABULAR_FUNCS = {
    "column_swap": _tabular.column_swap,
    "label_corrupt": _tabular.label_corrupt,
    "data_type_corrupt": _tabular.data_type_corrupt,
    "row_duplicate": _tabular.row_duplicate,
    "irrelevant_columns": _tabular.irrelevant_columns,
    "unit_change": _tabular.unit_change,
    "misalignment": _tabular.misalignment,
    "header_drift": _tabular.header_drift,
    "numeric_noise": _tabular.numeric_noise,
    "cell_reference_drift": _tabular.cell_reference_drift,
}

_DOCUMENT_FUNCS = {
    "ocr_noise": _document.ocr_noise,
    "number_corruption": _document.number_corruption,
    "text_redaction": _document.text_redaction,
    "paragraph_shuffle": _document.paragraph_shuffle,
    "encoding_error": _document.encoding_error,
    "section_removal": _document.section_removal,
    "span_omission": _document.span_omission,
    "snippet_insertion": _document.snippet_insertion,
    "citation_pointer_shift": _document.citation_pointer_shift,
    "tool_truncation": _document.tool_truncation,
}

_BY_NAME = {entry.op_name: entry for entry in _TABULAR_CATALOG + _DOCUMENT_CATALOG}


def catalog() -> list[CatalogEntry]:
    """The complete operator listing, tabular first, stable order."""
    return list(_TABULAR_CATALOG) + list(_DOCUMENT_CATALOG)


def catalog_entry(op_name: str) -> CatalogEntry:
    entry = _BY_NAME.get(op_name)
    if entry is None:
        raise UnknownOperator(op_name)
    return entry


def default_params(op_name: str) -> dict:
    return catalog_entry(op_name).defaults()


def _effective_params(entry: CatalogEntry, params: dict | None) -> dict:
    effective = entry.defaults()
    for key, value in (params or {}).items():
        if key not in entry.param_schema:
            raise InvalidParams(entry.op_name, f"unknown parameter {key!r}")
        effective[key] = value
    return effective


def apply_tabular(
    artifact: TableArtifact,
    op_name: str,
    params: dict | None = None,
    seed: int = 0,
) -> tuple[TableArtifact, PerturbationRecord]:
    entry = catalog_entry(op_name)
    if entry.modality != MODALITY_TABULAR:
        raise UnknownOperator(f"{op_name} (not a tabular operator)")
    effective = _effective_params(entry, params)
    perturbed, locus = _TABULAR_FUNCS[op_name](artifact, effective, CounterRng(seed))
    record = PerturbationRecord(op_name, MODALITY_TABULAR, tuple(locus), effective, seed)
    return perturbed, record


def apply_document(
    artifact: DocumentArtifact,
    op_name: str,
    params: dict | None = None,
    seed: int = 0,
) -> tuple[DocumentArtifact, PerturbationRecord]:
    entry = catalog_entry(op_name)
    if entry.modality != MODALITY_DOCUMENT:
        raise UnknownOperator(f"{op_name} (not a document operator)")
    effective = _effective_params(entry, params)
    perturbed, locus = _DOCUMENT_FUNCS[op_name](artifact, effective, CounterRng(seed))
    record = PerturbationRecord(op_name, MODALITY_DOCUMENT, tuple(locus), effective, seed)
    return perturbed, record
