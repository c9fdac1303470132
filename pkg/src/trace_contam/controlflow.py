"""Control-flow diagnostics over a paired alignment, and the recurring
divergence patterns derived from them: rerouting, extended execution,
early termination, looping.

All counts are derived purely from the alignment ops and the two signature
sequences; a pair with a zero-cost alignment gets all-zero diagnostics so a
trace paired with itself never signals anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import DEFAULT_CONFIG, AnalysisConfig
from .divergence import DELETE, INSERT, SUBSTITUTE, Alignment, replay
from .events import EventKind, Trace
from .signatures import HALT_EARLY_STOP, Signature, bucket_halt_reason, signature_sequence

PATTERN_REROUTING = "rerouting"
PATTERN_EXTENDED = "extended_execution"
PATTERN_EARLY_TERMINATION = "early_termination"
PATTERN_LOOPING = "looping"
ALL_PATTERNS = (
    PATTERN_REROUTING,
    PATTERN_EXTENDED,
    PATTERN_EARLY_TERMINATION,
    PATTERN_LOOPING,
)


class AlignmentMismatch(Exception):
    """The supplied alignment does not replay the clean pair into the perturbed one."""


@dataclass(frozen=True)
class LoopSpan:
    start: int  # index into the perturbed signature sequence
    period: int
    repetitions: int

    def to_dict(self) -> dict:
        return {"start": self.start, "period": self.period, "repetitions": self.repetitions}


@dataclass(frozen=True)
class ControlFlowDiagnostics:
    reroute_count: int = 0
    tool_calls_added: int = 0
    tool_calls_removed: int = 0
    introduced_failures: int = 0
    retry_count: int = 0
    loop_spans: tuple[LoopSpan, ...] = ()
    early_terminated: bool = False
    extended_execution: bool = False
    length_ratio: float = 1.0

    def to_dict(self) -> dict:
        return {
            "reroute_count": self.reroute_count,
            "tool_calls_added": self.tool_calls_added,
            "tool_calls_removed": self.tool_calls_removed,
            "introduced_failures": self.introduced_failures,
            "retry_count": self.retry_count,
            "loop_spans": [span.to_dict() for span in self.loop_spans],
            "early_terminated": self.early_terminated,
            "extended_execution": self.extended_execution,
            "length_ratio": self.length_ratio if math.isfinite(self.length_ratio) else None,
        }


def _consecutive_retries(sigs: list[Signature]) -> int:
    """Adjacent tool invocations of the same tool+operation, success ignored."""
    count = 0
    for prev, cur in zip(sigs, sigs[1:]):
        if prev.kind is EventKind.TOOL_INVOCATION and cur.kind is EventKind.TOOL_INVOCATION:
            if (prev.key_fields[0] == cur.key_fields[0]
                    and prev.key_fields[1] == cur.key_fields[1]):
                count += 1
    return count


def _contains(haystack: list[Signature], needle: tuple[Signature, ...]) -> bool:
    width = len(needle)
    for start in range(len(haystack) - width + 1):
        if tuple(haystack[start:start + width]) == needle:
            return True
    return False


def _block_has_smaller_period(block: list[Signature], period: int) -> bool:
    for smaller in range(1, period):
        if period % smaller == 0 and all(
            block[k] == block[k % smaller] for k in range(period)
        ):
            return True
    return False


def find_loop_spans(
    perturbed: list[Signature],
    clean: list[Signature],
    max_period: int = 3,
) -> list[LoopSpan]:
    """Maximal periodic repeats (periods 1..max_period) in the perturbed
    sequence whose repeated pattern does not occur in the clean sequence."""
    spans: list[LoopSpan] = []
    n = len(perturbed)
    for period in range(1, max_period + 1):
        start = 0
        while start + 2 * period <= n:
            if perturbed[start:start + period] != perturbed[start + period:start + 2 * period]:
                start += 1
                continue
            end = start + 2 * period
            while end < n and perturbed[end] == perturbed[end - period]:
                end += 1
            repetitions = (end - start) // period
            block = perturbed[start:start + period]
            probe = tuple(perturbed[start:start + 2 * period])
            if not _block_has_smaller_period(block, period) and not _contains(clean, probe):
                spans.append(LoopSpan(start, period, repetitions))
            # next maximal run with this period starts past the current one
            start = end - period + 1
    spans.sort(key=lambda s: (s.start, s.period))
    return spans


def diagnostics(
    clean: Trace,
    perturbed: Trace,
    alignment: Alignment,
    config: AnalysisConfig = DEFAULT_CONFIG,
) -> ControlFlowDiagnostics:
    """Derive control-flow diagnostics from an alignment over the pair.

    Raises AlignmentMismatch when the alignment does not replay the clean
    signature sequence into the perturbed one. Early termination is judged
    relative to the clean baseline (the clean run completed, the perturbed one
    did not); when both conditions for truncation and extension hold,
    truncation wins, keeping the two flags mutually exclusive.
    """
    clean_sigs = signature_sequence(clean, config.include_retrieval)
    pert_sigs = signature_sequence(perturbed, config.include_retrieval)
    if replay(alignment, clean_sigs, pert_sigs) != pert_sigs:
        raise AlignmentMismatch("alignment does not transform clean signatures into perturbed")

    n_clean = len(clean.events)
    n_pert = len(perturbed.events)
    if n_clean == 0:
        length_ratio = 1.0 if n_pert == 0 else math.inf
    else:
        length_ratio = n_pert / n_clean

    if alignment.cost == 0:
        return ControlFlowDiagnostics(length_ratio=length_ratio)

    reroutes = 0
    added_tools = 0
    removed_tools = 0
    failures = 0
    inserted_control = 0
    for op in alignment.ops:
        if op.op == SUBSTITUTE:
            c_sig, p_sig = clean_sigs[op.i], pert_sigs[op.j]
            if c_sig.kind is EventKind.ROUTING_DECISION:
                reroutes += 1
            if (c_sig.kind is EventKind.TOOL_INVOCATION
                    and p_sig.kind is EventKind.TOOL_INVOCATION
                    and c_sig.field("success") == "true"
                    and p_sig.field("success") == "false"):
                failures += 1
            if p_sig.kind is EventKind.TOOL_FAILURE and c_sig.kind is not EventKind.TOOL_FAILURE:
                failures += 1
        elif op.op == INSERT:
            p_sig = pert_sigs[op.j]
            if p_sig.kind is EventKind.TOOL_INVOCATION:
                added_tools += 1
                if p_sig.field("success") == "false":
                    failures += 1
            if p_sig.kind is EventKind.TOOL_FAILURE:
                failures += 1
            if p_sig.kind in (EventKind.ROUTING_DECISION, EventKind.TOOL_INVOCATION):
                inserted_control += 1
        elif op.op == DELETE:
            if clean_sigs[op.i].kind is EventKind.TOOL_INVOCATION:
                removed_tools += 1

    retry_count = max(0, _consecutive_retries(pert_sigs) - _consecutive_retries(clean_sigs))
    loop_spans = tuple(find_loop_spans(pert_sigs, clean_sigs, config.loop_max_period))

    clean_has_outcome = clean.task_outcome() is not None
    pert_has_outcome = perturbed.task_outcome() is not None

    def _ends_halt_early(trace: Trace) -> bool:
        if not trace.events:
            return False
        last = trace.events[-1]
        return (last.kind is EventKind.AGENT_HALT
                and bucket_halt_reason(last.payload["reason"]) == HALT_EARLY_STOP)

    truncated_suffix = bool(alignment.ops) and alignment.ops[-1].op == DELETE
    early = (
        (clean_has_outcome and not pert_has_outcome)
        or (_ends_halt_early(perturbed) and not _ends_halt_early(clean))
        or (length_ratio <= config.truncation_ratio and truncated_suffix)
    )
    extended = (
        length_ratio >= config.extension_ratio or inserted_control >= config.min_inserted_control
    ) and not early

    return ControlFlowDiagnostics(
        reroute_count=reroutes,
        tool_calls_added=added_tools,
        tool_calls_removed=removed_tools,
        introduced_failures=failures,
        retry_count=retry_count,
        loop_spans=loop_spans,
        early_terminated=early,
        extended_execution=extended,
        length_ratio=length_ratio,
    )


def classify_patterns(diag: ControlFlowDiagnostics) -> set[str]:
    """Pattern labels implied by the diagnostics; a pair may carry several."""
    patterns: set[str] = set()
    if diag.reroute_count >= 1:
        patterns.add(PATTERN_REROUTING)
    if diag.extended_execution:
        patterns.add(PATTERN_EXTENDED)
    if diag.early_terminated:
        patterns.add(PATTERN_EARLY_TERMINATION)
    if diag.loop_spans:
        patterns.add(PATTERN_LOOPING)
    return patterns
