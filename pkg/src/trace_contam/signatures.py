"""Structural event signatures: the control-flow abstraction events are
compared under.

A signature keeps only the fields that determine control flow and drops all
lexical content (answer text, parameter digests, ids, token counts), so that
two runs wording things differently but doing the same thing compare equal.
The canonical text form is ``kind|field=value|...`` with fields in a fixed
per-kind order; it is stable and appears in reports and diff output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .events import Event, EventKind, Trace

HALT_EARLY_STOP = "early_stop"
HALT_MAX_STEPS = "max_steps"
HALT_ERROR = "error"

_MAX_STEP_WORDS = ("max_steps", "max steps", "step limit", "step budget", "max_iterations")
_ERROR_WORDS = ("error", "fail", "exception", "timeout", "crash")


def bucket_halt_reason(reason: str) -> str:
    """Bucket a free-text halt reason into {early_stop, max_steps, error}.

    Raw reasons vary lexically between runs; bucketing keeps them from
    creating spurious divergence.
    """
    lowered = reason.strip().lower()
    if any(word in lowered for word in _MAX_STEP_WORDS):
        return HALT_MAX_STEPS
    if any(word in lowered for word in _ERROR_WORDS):
        return HALT_ERROR
    return HALT_EARLY_STOP


def _flag(value: bool) -> str:
    return "true" if value else "false"


@dataclass(frozen=True)
class Signature:
    kind: EventKind
    key_fields: tuple[tuple[str, str], ...]

    def canonical(self) -> str:
        parts = [self.kind.value]
        parts.extend(f"{name}={value}" for name, value in self.key_fields)
        return "|".join(parts)

    def field(self, name: str) -> str | None:
        for key, value in self.key_fields:
            if key == name:
                return value
        return None


def signature_of(event: Event, entry_types: Mapping[str, str] | None = None) -> Signature:
    """Map one schema-valid event to its structural signature.

    ``entry_types`` resolves memory_read targets to the entry_type written
    earlier in the trace; without it (or for an unknown id) reads get the
    generic "read" marker. Task outcome events map to a constant signature:
    answer changes are measured separately, not as structural divergence.
    """
    kind = event.kind
    payload = event.payload
    if kind is EventKind.ROUTING_DECISION:
        fields = (("chosen_agent", payload["chosen_agent"]),)
    elif kind is EventKind.TOOL_INVOCATION:
        fields = (
            ("tool_name", payload["tool_name"]),
            ("operation", payload["operation"]),
            ("success", _flag(payload["success"])),
        )
    elif kind is EventKind.MEMORY_WRITE:
        fields = (("entry_type", payload["entry_type"]),)
    elif kind is EventKind.MEMORY_READ:
        resolved = (entry_types or {}).get(payload["entry_id"], "read")
        fields = (("entry_type", resolved),)
    elif kind is EventKind.RETRIEVAL_SHOWN:
        fields = (("count", str(len(payload["entry_ids"]))),)
    elif kind is EventKind.AGENT_OUTPUT:
        fields = (
            ("action", payload["action"]),
            ("is_task_outcome", _flag(payload["is_task_outcome"])),
        )
    elif kind is EventKind.TASK_OUTCOME:
        fields = ()
    elif kind is EventKind.TOOL_FAILURE:
        fields = (("tool_name", payload["tool_name"]),)
    else:  # AGENT_HALT
        fields = (("reason_class", bucket_halt_reason(payload["reason"])),)
    return Signature(kind, fields)


def entry_type_map(trace: Trace) -> dict[str, str]:
    """entry_id -> entry_type from memory_write events; first write wins."""
    mapping: dict[str, str] = {}
    for event in trace.events:
        if event.kind is EventKind.MEMORY_WRITE:
            mapping.setdefault(event.payload["entry_id"], event.payload["entry_type"])
    return mapping


def signature_sequence(trace: Trace, include_retrieval: bool = True) -> list[Signature]:
    """Signatures of all events in order.

    With the default ``include_retrieval=True`` the result has exactly one
    signature per event; setting it False drops retrieval_shown events from
    divergence entirely.
    """
    entry_types = entry_type_map(trace)
    out: list[Signature] = []
    for event in trace.events:
        if not include_retrieval and event.kind is EventKind.RETRIEVAL_SHOWN:
            continue
        out.append(signature_of(event, entry_types))
    return out
