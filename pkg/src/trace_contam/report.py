"""Per-pair analysis records and corpus-level aggregation.

Batch output is deterministic: pairs are processed in sorted task order,
medians use lower interpolation on even counts (IQR = Q3 - Q1 under the same
rule), every fraction states its denominator, and the configuration used is
echoed into every report. Files are written atomically (temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

from .config import DEFAULT_CONFIG, AnalysisConfig
from .controlflow import ALL_PATTERNS
from .events import Trace, parse_trace
from .records import MODALITIES
from .taxonomy import ALL_BUCKETS, ManifestationLabel, PairAnalysis, analyze_pair

RECORD_VERSION = 1

ALL_LABELS = (
    ManifestationLabel.SILENT.value,
    ManifestationLabel.DETOUR_RECOVERY.value,
    ManifestationLabel.COMBINED.value,
    ManifestationLabel.NO_EFFECT.value,
)
# labels with structural divergence; "of divergent runs" denominators use these
DIVERGENT_LABELS = (
    ManifestationLabel.DETOUR_RECOVERY.value,
    ManifestationLabel.COMBINED.value,
)


def quantile_lower(values: list[float], q: float) -> float | None:
    """Quantile with lower interpolation: element at floor((n-1) * q)."""
    if not values:
        return None
    ordered = sorted(values)
    return ordered[int((len(ordered) - 1) * q)]


def median_iqr(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    med = quantile_lower(values, 0.5)
    q1 = quantile_lower(values, 0.25)
    q3 = quantile_lower(values, 0.75)
    return med, q3 - q1


def build_pair_record(clean: Trace, perturbed: Trace, analysis: PairAnalysis) -> dict:
    record = {
        "record_version": RECORD_VERSION,
        "task_id": clean.meta.task_id,
        "model_id": clean.meta.model_id,
        "seed": perturbed.meta.seed,
        "op_name": perturbed.meta.perturbation.op_name if perturbed.meta.perturbation else None,
        "modality": perturbed.meta.perturbation.modality if perturbed.meta.perturbation else None,
        "clean_events": len(clean.events),
        "perturbed_events": len(perturbed.events),
    }
    record.update(analysis.to_dict())
    return record


def analyze_files(clean_path: str, perturbed_path: str,
                  config: AnalysisConfig = DEFAULT_CONFIG) -> dict:
    """Parse both trace files, analyze, and return the pair record."""
    with open(clean_path, encoding="utf-8") as fh:
        clean = parse_trace(fh)
    with open(perturbed_path, encoding="utf-8") as fh:
        perturbed = parse_trace(fh)
    analysis = analyze_pair(clean, perturbed, config)
    record = build_pair_record(clean, perturbed, analysis)
    record["config_echo"] = config.echo()
    return record


@dataclass
class BatchResult:
    aggregate: dict
    pair_records: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)


def _fraction(count: int, denominator: int) -> float | None:
    return count / denominator if denominator else None


def aggregate_records(records: list[dict], errors: list[dict],
                      config: AnalysisConfig = DEFAULT_CONFIG) -> dict:
    """Fold per-pair records into the corpus-level report structure."""
    n = len(records)
    divergent = sum(1 for r in records if r["label"] in DIVERGENT_LABELS)

    by_manifestation = {}
    for label in ALL_LABELS:
        count = sum(1 for r in records if r["label"] == label)
        by_manifestation[label] = {"count": count, "fraction": _fraction(count, n)}

    by_pattern = {}
    for pattern in ALL_PATTERNS:
        count = sum(1 for r in records if pattern in r["patterns"])
        by_pattern[pattern] = {
            "count": count,
            "fraction_of_divergent": _fraction(count, divergent),
            "fraction_of_all": _fraction(count, n),
        }

    by_perturbation = {}
    for op_name in sorted({r["op_name"] for r in records if r["op_name"]}):
        subset = [r for r in records if r["op_name"] == op_name]
        d_norms = [r["divergence"]["d_norm"] for r in subset]
        overheads = [r["token_overhead"] for r in subset if r["token_overhead"] is not None]
        med_d, iqr_d = median_iqr(d_norms)
        med_o, iqr_o = median_iqr(overheads)
        recovered = sum(1 for r in subset if r["recovered"])
        by_perturbation[op_name] = {
            "pairs": len(subset),
            "median_d_norm": med_d,
            "iqr_d_norm": iqr_d,
            "median_overhead": med_o,
            "iqr_overhead": iqr_o,
            "overhead_missing": len(subset) - len(overheads),
            "recovery_rate": _fraction(recovered, len(subset)),
        }

    by_modality = {}
    for modality in MODALITIES:
        subset = [r for r in records if r["modality"] == modality]
        diverged = sum(1 for r in subset if r["label"] in DIVERGENT_LABELS)
        pattern_counts = {
            pattern: sum(1 for r in subset if pattern in r["patterns"])
            for pattern in ALL_PATTERNS
        }
        by_modality[modality] = {
            "pairs": len(subset),
            "divergent": diverged,
            "pattern_counts": pattern_counts,
            "pattern_fraction_of_divergent": {
                pattern: _fraction(count, diverged)
                for pattern, count in pattern_counts.items()
            },
        }

    timing_histogram = {
        bucket: sum(1 for r in records if r["timing_bucket"] == bucket)
        for bucket in ALL_BUCKETS
    }

    return {
        "record_version": RECORD_VERSION,
        "n_pairs": n,
        "n_failed": len(errors),
        "denominators": {"all": n, "divergent": divergent},
        "by_manifestation": by_manifestation,
        "by_pattern": by_pattern,
        "by_perturbation": by_perturbation,
        "by_modality": by_modality,
        "timing_histogram": timing_histogram,
        "errors": errors,
        "config_echo": config.echo(),
    }


def _fmt(value: float | None, width: int = 8) -> str:
    if value is None:
        return "-".rjust(width)
    return f"{value:.4f}".rjust(width)


def render_text(aggregate: dict) -> str:
    """Human-readable aligned-text report."""
    lines = []
    n = aggregate["n_pairs"]
    divergent = aggregate["denominators"]["divergent"]
    lines.append(f"pairs analyzed: {n}    failed: {aggregate['n_failed']}    divergent: {divergent}")
    lines.append("")
    lines.append("manifestation        count  fraction")
    for label in ALL_LABELS:
        cell = aggregate["by_manifestation"][label]
        lines.append(f"  {label:<18} {cell['count']:>5} {_fmt(cell['fraction'])}")
    lines.append("")
    lines.append("pattern              count  of-divergent  of-all")
    for pattern in ALL_PATTERNS:
        cell = aggregate["by_pattern"][pattern]
        lines.append(
            f"  {pattern:<18} {cell['count']:>5} {_fmt(cell['fraction_of_divergent'], 12)}"
            f" {_fmt(cell['fraction_of_all'])}"
        )
    lines.append("")
    lines.append("perturbation          pairs  med d_norm  IQR      med overhead  IQR      recovery")
    for op_name, cell in sorted(aggregate["by_perturbation"].items()):
        lines.append(
            f"  {op_name:<19} {cell['pairs']:>5} {_fmt(cell['median_d_norm'], 10)}"
            f" {_fmt(cell['iqr_d_norm'])} {_fmt(cell['median_overhead'], 12)}"
            f" {_fmt(cell['iqr_overhead'])} {_fmt(cell['recovery_rate'])}"
        )
    lines.append("")
    lines.append("timing bucket        count")
    for bucket in ALL_BUCKETS:
        lines.append(f"  {bucket:<18} {aggregate['timing_histogram'][bucket]:>5}")
    lines.append("")
    lines.append("config: " + json.dumps(aggregate["config_echo"], sort_keys=True))
    return "\n".join(lines) + "\n"


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def discover_pairs(corpus_dir: str) -> list[tuple[str, str, str]]:
    """(task_name, clean path, perturbed path) for every complete task dir."""
    pairs = []
    if not os.path.isdir(corpus_dir):
        raise FileNotFoundError(f"corpus directory {corpus_dir!r} does not exist")
    for name in sorted(os.listdir(corpus_dir)):
        task_dir = os.path.join(corpus_dir, name)
        clean_path = os.path.join(task_dir, "clean.trace")
        pert_path = os.path.join(task_dir, "perturbed.trace")
        if os.path.isfile(clean_path) and os.path.isfile(pert_path):
            pairs.append((name, clean_path, pert_path))
    return pairs


def run_batch(corpus_dir: str, out_dir: str,
              config: AnalysisConfig = DEFAULT_CONFIG) -> BatchResult:
    """Analyze a corpus directory and write pairs.jsonl, aggregate.json,
    aggregate.txt under out_dir. Pairs that fail to parse or analyze land in
    the errors section; aggregation proceeds over the rest."""
    records: list[dict] = []
    errors: list[dict] = []
    for name, clean_path, pert_path in discover_pairs(corpus_dir):
        try:
            with open(clean_path, encoding="utf-8") as fh:
                clean = parse_trace(fh)
            with open(pert_path, encoding="utf-8") as fh:
                perturbed = parse_trace(fh)
            analysis = analyze_pair(clean, perturbed, config)
            records.append(build_pair_record(clean, perturbed, analysis))
        except Exception as exc:
            errors.append({"task": name, "error": type(exc).__name__, "message": str(exc)})
    records.sort(key=lambda r: (r["task_id"], r["op_name"] or ""))
    aggregate = aggregate_records(records, errors, config)

    pairs_text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    write_atomic(os.path.join(out_dir, "pairs.jsonl"), pairs_text)
    write_atomic(os.path.join(out_dir, "aggregate.json"),
                 json.dumps(aggregate, sort_keys=True, indent=2) + "\n")
    write_atomic(os.path.join(out_dir, "aggregate.txt"), render_text(aggregate))
    return BatchResult(aggregate=aggregate, pair_records=records, errors=errors)
