"""Manifestation taxonomy and pair-level verdicts.

Each clean/perturbed pair lands in exactly one cell of the grid spanned by
(structural divergence?, outcome changed?):

    no  / yes -> silent semantic corruption
    yes / no  -> behavioral detour with recovery
    yes / yes -> combined disruption
    no  / no  -> no effect

Structural divergence means d_norm above a configurable epsilon. Recovery is
by definition the negation of an outcome change.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum

from .config import DEFAULT_CONFIG, AnalysisConfig
from .controlflow import ControlFlowDiagnostics, classify_patterns, diagnostics
from .divergence import KIND_NONE, DivergenceReport, divergence_report
from .events import Trace
from .signatures import signature_sequence


class ManifestationLabel(str, Enum):
    SILENT = "silent"
    DETOUR_RECOVERY = "detour_recovery"
    COMBINED = "combined"
    NO_EFFECT = "no_effect"


BUCKET_EARLY = "early"
BUCKET_MID = "mid"
BUCKET_LATE = "late"
BUCKET_NO_DIVERGENCE = "no_divergence"
ALL_BUCKETS = (BUCKET_EARLY, BUCKET_MID, BUCKET_LATE, BUCKET_NO_DIVERGENCE)

COMPARATORS = ("exact", "normalized", "numeric")

_WS_RE = re.compile(r"\s+")


class DomainError(ValueError):
    """An input is outside its documented domain."""


class TaskMismatch(Exception):
    """The two traces do not describe the same task."""


def _normalize_answer(text: str) -> str:
    return _WS_RE.sub(" ", text.strip()).casefold()


def answers_equal(
    a: str,
    b: str,
    comparator: str = "normalized",
    numeric_tolerance: float = 1e-9,
) -> bool:
    """Compare two task answers under the named policy.

    "numeric" parses both sides as decimals and compares with an absolute
    tolerance, falling back to normalized text when either side does not
    parse.
    """
    if comparator == "exact":
        return a == b
    if comparator == "normalized":
        return _normalize_answer(a) == _normalize_answer(b)
    if comparator == "numeric":
        try:
            return abs(Decimal(a.strip()) - Decimal(b.strip())) <= Decimal(str(numeric_tolerance))
        except (InvalidOperation, ValueError):
            return _normalize_answer(a) == _normalize_answer(b)
    raise DomainError(f"unknown comparator {comparator!r}")


def outcome_changed(
    clean: Trace,
    perturbed: Trace,
    comparator: str = "normalized",
    numeric_tolerance: float = 1e-9,
) -> bool:
    """False iff both runs produced task outcomes with equal answers.

    A perturbed run that never reached an outcome counts as changed when the
    clean run did; two outcome-less runs count as unchanged.
    """
    clean_outcome = clean.task_outcome()
    pert_outcome = perturbed.task_outcome()
    if clean_outcome is None and pert_outcome is None:
        return False
    if clean_outcome is None or pert_outcome is None:
        return True
    return not answers_equal(
        clean_outcome.payload["answer"],
        pert_outcome.payload["answer"],
        comparator,
        numeric_tolerance,
    )


def classify_manifestation(
    d_norm: float,
    changed: bool,
    epsilon: float = DEFAULT_CONFIG.epsilon,
) -> ManifestationLabel:
    if not 0.0 <= d_norm <= 1.0:
        raise DomainError(f"d_norm must lie in [0, 1], got {d_norm}")
    if not 0.0 <= epsilon < 1.0:
        raise DomainError(f"epsilon must lie in [0, 1), got {epsilon}")
    diverged = d_norm > epsilon
    if diverged:
        return ManifestationLabel.COMBINED if changed else ManifestationLabel.DETOUR_RECOVERY
    return ManifestationLabel.SILENT if changed else ManifestationLabel.NO_EFFECT


def token_overhead(clean: Trace, perturbed: Trace) -> float | None:
    """Perturbed token total over clean token total.

    None (absent) when the clean total is zero or either trace flags missing
    counts; an empty perturbed trace yields 0.0, the early-termination
    artifact.
    """
    if clean.meta.tokens_missing or perturbed.meta.tokens_missing:
        return None
    clean_total = clean.total_tokens()
    if clean_total == 0:
        return None
    return perturbed.total_tokens() / clean_total


def timing_bucket(report: DivergenceReport, config: AnalysisConfig = DEFAULT_CONFIG) -> str:
    if report.first_kind == KIND_NONE:
        return BUCKET_NO_DIVERGENCE
    t_norm = report.t_star_norm
    if t_norm < config.early_bucket:
        return BUCKET_EARLY
    if t_norm > config.late_bucket:
        return BUCKET_LATE
    return BUCKET_MID


@dataclass(frozen=True)
class PairAnalysis:
    divergence: DivergenceReport
    diagnostics: ControlFlowDiagnostics
    patterns: frozenset[str]
    label: ManifestationLabel
    outcome_changed: bool
    recovered: bool
    token_overhead: float | None
    timing_bucket: str

    def to_dict(self) -> dict:
        return {
            "divergence": self.divergence.to_dict(),
            "diagnostics": self.diagnostics.to_dict(),
            "patterns": sorted(self.patterns),
            "label": self.label.value,
            "outcome_changed": self.outcome_changed,
            "recovered": self.recovered,
            "token_overhead": self.token_overhead,
            "timing_bucket": self.timing_bucket,
        }


def analyze_pair(
    clean: Trace,
    perturbed: Trace,
    config: AnalysisConfig = DEFAULT_CONFIG,
) -> PairAnalysis:
    """Run the full pipeline for one pair: signatures, alignment, diagnostics,
    patterns, manifestation label, cost, and timing bucket.

    Deterministic for a fixed config. Raises TaskMismatch when the traces
    name different tasks.
    """
    if clean.meta.task_id != perturbed.meta.task_id:
        raise TaskMismatch(
            f"clean task {clean.meta.task_id!r} vs perturbed task {perturbed.meta.task_id!r}"
        )
    clean_sigs = signature_sequence(clean, config.include_retrieval)
    pert_sigs = signature_sequence(perturbed, config.include_retrieval)
    report, alignment = divergence_report(
        clean_sigs, pert_sigs, config.t_star_denominator, config.cell_budget
    )
    diag = diagnostics(clean, perturbed, alignment, config)
    patterns = classify_patterns(diag)
    changed = outcome_changed(clean, perturbed, config.comparator, config.numeric_tolerance)
    label = classify_manifestation(report.d_norm, changed, config.epsilon)
    return PairAnalysis(
        divergence=report,
        diagnostics=diag,
        patterns=frozenset(patterns),
        label=label,
        outcome_changed=changed,
        recovered=not changed,
        token_overhead=token_overhead(clean, perturbed),
        timing_bucket=timing_bucket(report, config),
    )
