"""Structured workflow event traces and their line-oriented log format.

A trace log is UTF-8 text: one ``#meta`` header line carrying run metadata as
JSON, followed by one JSON object per line, one per event, in execution order.
Serialization is canonical (sorted keys, compact separators, fixed field set),
so structurally equal traces serialize to identical bytes. Event payloads are
validated strictly against the per-kind schema, but unknown *extra* payload
fields are carried opaquely and survive a round trip.

See docs/trace_format.md for the full schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from .records import PerturbationRecord, RecordError
from .rng import fnv1a_64


class EventKind(str, Enum):
    ROUTING_DECISION = "routing_decision"
    TOOL_INVOCATION = "tool_invocation"
    MEMORY_WRITE = "memory_write"
    MEMORY_READ = "memory_read"
    RETRIEVAL_SHOWN = "retrieval_shown"
    AGENT_OUTPUT = "agent_output"
    TASK_OUTCOME = "task_outcome"
    TOOL_FAILURE = "tool_failure"
    AGENT_HALT = "agent_halt"


class Condition(str, Enum):
    CLEAN = "clean"
    PERTURBED = "perturbed"


# Required payload fields per kind; "list_str" means list of strings.
REQUIRED_PAYLOAD_FIELDS: dict[EventKind, dict[str, str]] = {
    EventKind.ROUTING_DECISION: {"chosen_agent": "str"},
    EventKind.TOOL_INVOCATION: {
        "tool_name": "str",
        "operation": "str",
        "params_digest": "str",
        "success": "bool",
    },
    EventKind.MEMORY_WRITE: {"entry_id": "str", "entry_type": "str"},
    EventKind.MEMORY_READ: {"entry_id": "str"},
    EventKind.RETRIEVAL_SHOWN: {"entry_ids": "list_str"},
    EventKind.AGENT_OUTPUT: {"action": "str", "is_task_outcome": "bool"},
    EventKind.TASK_OUTCOME: {"answer": "str"},
    EventKind.TOOL_FAILURE: {"tool_name": "str", "reason": "str"},
    EventKind.AGENT_HALT: {"reason": "str"},
}

_META_FIELDS = {"task_id", "model_id", "condition", "seed", "perturbation", "tokens_missing"}
_EVENT_FIELDS = {"index", "kind", "agent", "payload", "token_count", "produced_id", "upstream_ids"}


class TraceError(Exception):
    """Base class for trace parsing failures."""


class MetadataMissing(TraceError):
    def __init__(self) -> None:
        super().__init__("trace log has no #meta header line")


class MalformedLine(TraceError):
    def __init__(self, line_no: int, reason: str) -> None:
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class SchemaViolation(TraceError):
    def __init__(self, line_no: int, field_name: str, reason: str = "") -> None:
        self.line_no = line_no
        self.field = field_name
        self.reason = reason
        detail = f" ({reason})" if reason else ""
        super().__init__(f"line {line_no}: schema violation on field {field_name!r}{detail}")


@dataclass(frozen=True)
class Event:
    index: int
    kind: EventKind
    agent: str
    payload: dict
    token_count: int = 0
    produced_id: str | None = None
    upstream_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class TraceMeta:
    task_id: str
    model_id: str
    condition: Condition
    seed: int
    perturbation: PerturbationRecord | None = None
    tokens_missing: bool = False


@dataclass(frozen=True)
class Trace:
    meta: TraceMeta
    events: tuple[Event, ...] = ()

    def __len__(self) -> int:
        return len(self.events)

    def task_outcome(self) -> Event | None:
        for event in self.events:
            if event.kind is EventKind.TASK_OUTCOME:
                return event
        return None

    def total_tokens(self) -> int:
        return sum(event.token_count for event in self.events)


@dataclass(frozen=True)
class Violation:
    """One broken invariant; ``event_index`` is None for trace-level rules."""

    event_index: int | None
    rule: str
    message: str


def params_digest(params: object) -> str:
    """Stable 64-bit FNV-1a digest of tool parameters, as 16 hex chars.

    Mappings are canonicalized to sorted-key compact JSON first so logically
    equal parameter sets digest identically.
    """
    if isinstance(params, str):
        text = params
    else:
        text = json.dumps(params, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return f"{fnv1a_64(text):016x}"


def _canonical_json(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _check_payload(kind: EventKind, payload: dict, line_no: int) -> None:
    for name, typ in REQUIRED_PAYLOAD_FIELDS[kind].items():
        if name not in payload:
            raise SchemaViolation(line_no, name, f"required by kind {kind.value!r}")
        value = payload[name]
        if typ == "str":
            if not isinstance(value, str):
                raise SchemaViolation(line_no, name, "expected string")
        elif typ == "bool":
            if not isinstance(value, bool):
                raise SchemaViolation(line_no, name, "expected boolean")
        elif typ == "list_str":
            if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
                raise SchemaViolation(line_no, name, "expected list of strings")


def _event_from_obj(obj: dict, line_no: int) -> Event:
    unknown = set(obj) - _EVENT_FIELDS
    if unknown:
        raise SchemaViolation(line_no, sorted(unknown)[0], "unknown event field")
    for required in ("index", "kind", "agent", "payload"):
        if required not in obj:
            raise SchemaViolation(line_no, required, "missing")

    index = obj["index"]
    if not isinstance(index, int) or isinstance(index, bool) or index < 0:
        raise SchemaViolation(line_no, "index", "expected nonnegative integer")

    kind_token = obj["kind"]
    try:
        kind = EventKind(kind_token)
    except ValueError:
        raise SchemaViolation(line_no, "kind", f"unknown event kind {kind_token!r}") from None

    agent = obj["agent"]
    if not isinstance(agent, str):
        raise SchemaViolation(line_no, "agent", "expected string")

    payload = obj["payload"]
    if not isinstance(payload, dict):
        raise SchemaViolation(line_no, "payload", "expected object")
    _check_payload(kind, payload, line_no)

    token_count = obj.get("token_count", 0)
    if not isinstance(token_count, int) or isinstance(token_count, bool) or token_count < 0:
        raise SchemaViolation(line_no, "token_count", "expected nonnegative integer")

    produced_id = obj.get("produced_id")
    if produced_id is not None and not isinstance(produced_id, str):
        raise SchemaViolation(line_no, "produced_id", "expected string or null")

    upstream = obj.get("upstream_ids", [])
    if not isinstance(upstream, list) or not all(isinstance(x, str) for x in upstream):
        raise SchemaViolation(line_no, "upstream_ids", "expected list of strings")

    return Event(
        index=index,
        kind=kind,
        agent=agent,
        payload=payload,
        token_count=token_count,
        produced_id=produced_id,
        upstream_ids=tuple(upstream),
    )


def _meta_from_obj(obj: dict, line_no: int) -> TraceMeta:
    unknown = set(obj) - _META_FIELDS
    if unknown:
        raise MalformedLine(line_no, f"unknown metadata field {sorted(unknown)[0]!r}")
    for required in ("task_id", "model_id", "condition", "seed"):
        if required not in obj:
            raise SchemaViolation(line_no, required, "missing from metadata")
    if not isinstance(obj["task_id"], str):
        raise SchemaViolation(line_no, "task_id", "expected string")
    if not isinstance(obj["model_id"], str):
        raise SchemaViolation(line_no, "model_id", "expected string")
    try:
        condition = Condition(obj["condition"])
    except ValueError:
        raise SchemaViolation(line_no, "condition", f"unknown condition {obj['condition']!r}") from None
    seed = obj["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0 or seed >= 1 << 64:
        raise SchemaViolation(line_no, "seed", "expected 64-bit unsigned integer")
    perturbation = None
    if obj.get("perturbation") is not None:
        try:
            perturbation = PerturbationRecord.from_dict(obj["perturbation"])
        except RecordError as exc:
            raise SchemaViolation(line_no, "perturbation", str(exc)) from None
    tokens_missing = obj.get("tokens_missing", False)
    if not isinstance(tokens_missing, bool):
        raise SchemaViolation(line_no, "tokens_missing", "expected boolean")
    return TraceMeta(
        task_id=obj["task_id"],
        model_id=obj["model_id"],
        condition=condition,
        seed=seed,
        perturbation=perturbation,
        tokens_missing=tokens_missing,
    )


def _iter_lines(source: str | Iterable[str]) -> Iterator[str]:
    if isinstance(source, str):
        yield from source.split("\n")
    else:
        for line in source:
            yield line.rstrip("\n")


def parse_trace(source: str | Iterable[str]) -> Trace:
    """Parse a trace log from text or an iterable of lines.

    Raises MetadataMissing, MalformedLine, or SchemaViolation. Trace-level
    invariants (index ordering, outcome placement, ...) are not enforced here;
    use validate_trace for those.
    """
    meta: TraceMeta | None = None
    events: list[Event] = []
    for line_no, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        if meta is None:
            if not line.startswith("#meta"):
                raise MetadataMissing()
            body = line[len("#meta"):].strip()
            try:
                obj = json.loads(body)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, f"invalid metadata JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise MalformedLine(line_no, "metadata must be a JSON object")
            meta = _meta_from_obj(obj, line_no)
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise MalformedLine(line_no, "event must be a JSON object")
        events.append(_event_from_obj(obj, line_no))
    if meta is None:
        raise MetadataMissing()
    return Trace(meta=meta, events=tuple(events))


def serialize_trace(trace: Trace) -> str:
    """Canonical text form; byte-deterministic for structurally equal traces."""
    meta = trace.meta
    meta_obj = {
        "task_id": meta.task_id,
        "model_id": meta.model_id,
        "condition": meta.condition.value,
        "seed": meta.seed,
        "perturbation": meta.perturbation.to_dict() if meta.perturbation else None,
        "tokens_missing": meta.tokens_missing,
    }
    lines = ["#meta " + _canonical_json(meta_obj)]
    for event in trace.events:
        obj = {
            "index": event.index,
            "kind": event.kind.value,
            "agent": event.agent,
            "payload": event.payload,
            "token_count": event.token_count,
            "produced_id": event.produced_id,
            "upstream_ids": list(event.upstream_ids),
        }
        lines.append(_canonical_json(obj))
    return "\n".join(lines) + "\n"


def validate_trace(trace: Trace) -> list[Violation]:
    """Check every trace- and event-level invariant; empty list means valid."""
    violations: list[Violation] = []
    outcome_indices = [e.index for e in trace.events if e.kind is EventKind.TASK_OUTCOME]

    for position, event in enumerate(trace.events):
        if event.index != position:
            violations.append(
                Violation(position, "index_sequence",
                          f"event at position {position} has index {event.index}")
            )
        if event.token_count < 0:
            violations.append(
                Violation(position, "negative_token_count",
                          f"token_count {event.token_count} < 0")
            )
        if event.produced_id is not None and event.produced_id in event.upstream_ids:
            violations.append(
                Violation(position, "self_dependency",
                          f"produced_id {event.produced_id!r} appears in upstream_ids")
            )
        try:
            _check_payload(event.kind, event.payload, position)
        except SchemaViolation as exc:
            violations.append(Violation(position, "payload_mismatch", str(exc)))

    if len(outcome_indices) > 1:
        violations.append(
            Violation(outcome_indices[1], "multiple_task_outcomes",
                      f"{len(outcome_indices)} task_outcome events")
        )
    elif len(outcome_indices) == 1 and outcome_indices[0] != len(trace.events) - 1:
        violations.append(
            Violation(outcome_indices[0], "task_outcome_not_final",
                      "task_outcome is not the final event")
        )

    perturbed = trace.meta.condition is Condition.PERTURBED
    if perturbed != (trace.meta.perturbation is not None):
        violations.append(
            Violation(None, "condition_perturbation_mismatch",
                      "condition is perturbed iff a perturbation record is present")
        )
    return violations
