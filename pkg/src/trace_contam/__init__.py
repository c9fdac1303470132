"""trace-contam: trace-level contamination analysis for multi-agent workflows.

Compare paired clean/perturbed execution traces via structural signatures and
minimum-edit alignment, classify the manifestation (silent corruption, detour
with recovery, combined disruption, no effect), scope contamination through
artifact provenance, and generate seeded perturbations and labeled synthetic
corpora for controlled experiments.
"""

from .config import DEFAULT_CONFIG, AnalysisConfig
from .divergence import (
    Alignment,
    AlignOp,
    DivergenceReport,
    SequenceTooLong,
    edit_cost,
    edit_distance,
    first_divergence,
    normalized_divergence,
)
from .events import (
    Condition,
    Event,
    EventKind,
    Trace,
    TraceMeta,
    parse_trace,
    serialize_trace,
    validate_trace,
)
from .controlflow import ControlFlowDiagnostics, classify_patterns, diagnostics
from .provenance import ProvenanceGraph, build_graph, contamination_scope, outcome_contaminated
from .records import PerturbationRecord
from .signatures import Signature, signature_of, signature_sequence
from .simulator import GroundTruth, ScenarioSpec, generate_corpus, generate_pair
from .taxonomy import (
    ManifestationLabel,
    PairAnalysis,
    analyze_pair,
    classify_manifestation,
    outcome_changed,
    token_overhead,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "Alignment",
    "AlignOp",
    "Condition",
    "ControlFlowDiagnostics",
    "DEFAULT_CONFIG",
    "DivergenceReport",
    "Event",
    "EventKind",
    "GroundTruth",
    "ManifestationLabel",
    "PairAnalysis",
    "PerturbationRecord",
    "ProvenanceGraph",
    "ScenarioSpec",
    "SequenceTooLong",
    "Signature",
    "Trace",
    "TraceMeta",
    "analyze_pair",
    "build_graph",
    "classify_manifestation",
    "classify_patterns",
    "contamination_scope",
    "diagnostics",
    "edit_cost",
    "edit_distance",
    "first_divergence",
    "generate_corpus",
    "generate_pair",
    "normalized_divergence",
    "outcome_changed",
    "outcome_contaminated",
    "parse_trace",
    "serialize_trace",
    "signature_of",
    "signature_sequence",
    "token_overhead",
    "validate_trace",
]
