from __future__ import annotations

import pytest

from trace_contam.events import (
    Condition,
    Event,
    EventKind,
    Trace,
    TraceMeta,
    params_digest,
)
from trace_contam.records import PerturbationRecord


def make_meta(condition=Condition.CLEAN, perturbation=None, task_id="task_x",
              seed=7, tokens_missing=False) -> TraceMeta:
    return TraceMeta(
        task_id=task_id,
        model_id="test-model",
        condition=condition,
        seed=seed,
        perturbation=perturbation,
        tokens_missing=tokens_missing,
    )


def perturbed_meta(task_id="task_x", op_name="unit_change", seed=7) -> TraceMeta:
    record = PerturbationRecord(op_name, "tabular", ("col:1",), {}, seed)
    return make_meta(Condition.PERTURBED, record, task_id=task_id, seed=seed)


def routing(index, chosen, agent="coordinator", tokens=10):
    return Event(index, EventKind.ROUTING_DECISION, agent,
                 {"chosen_agent": chosen}, tokens)


def tool(index, name, operation, success=True, agent="worker", tokens=10,
         produced=None, upstream=(), digest=None):
    return Event(index, EventKind.TOOL_INVOCATION, agent,
                 {"tool_name": name, "operation": operation,
                  "params_digest": digest or params_digest(f"{name}:{operation}"),
                  "success": success},
                 tokens, produced, tuple(upstream))


def memory_write(index, entry_id, entry_type, agent="worker", tokens=10, upstream=()):
    return Event(index, EventKind.MEMORY_WRITE, agent,
                 {"entry_id": entry_id, "entry_type": entry_type},
                 tokens, entry_id, tuple(upstream))


def memory_read(index, entry_id, agent="worker", tokens=10):
    return Event(index, EventKind.MEMORY_READ, agent, {"entry_id": entry_id}, tokens)


def agent_output(index, action, is_task_outcome=False, agent="synthesizer", tokens=10,
                 produced=None, upstream=()):
    return Event(index, EventKind.AGENT_OUTPUT, agent,
                 {"action": action, "is_task_outcome": is_task_outcome},
                 tokens, produced, tuple(upstream))


def task_outcome(index, answer, agent="synthesizer", tokens=10, upstream=()):
    return Event(index, EventKind.TASK_OUTCOME, agent, {"answer": answer},
                 tokens, None, tuple(upstream))


def halt(index, reason, agent="coordinator", tokens=10):
    return Event(index, EventKind.AGENT_HALT, agent, {"reason": reason}, tokens)


def make_trace(events, meta=None) -> Trace:
    return Trace(meta=meta or make_meta(), events=tuple(events))


@pytest.fixture
def three_step_clean() -> Trace:
    """Compact clean run: route, parse, answer."""
    return make_trace([
        routing(0, "data_analyst"),
        tool(1, "table_tool", "parse_table", produced="art_1", upstream=("input_main",)),
        task_outcome(2, "42", upstream=("art_1",)),
    ])


@pytest.fixture
def revenue_pair(three_step_clean) -> tuple[Trace, Trace]:
    """3-event clean run vs 9-event perturbed run.

    The perturbed run replays the clean events with a six-event validation /
    retry detour spliced in after the first event, and reaches the same
    answer. Hand-computed alignment: match, 6 inserts, match, match, so
    ED = 6, d_norm = 6/9, t* = 1 (insertion).
    """
    detour = []
    for k in range(6):
        if k % 2 == 0:
            detour.append(routing(0, "validator"))
        else:
            detour.append(tool(0, "schema_check", f"check_{k}", produced=f"chk_{k}",
                               upstream=("art_p",)))
    events = [three_step_clean.events[0]]
    events.extend(detour)
    events.append(three_step_clean.events[1])
    events.append(three_step_clean.events[2])
    events = [
        Event(i, e.kind, e.agent, e.payload, e.token_count, e.produced_id, e.upstream_ids)
        for i, e in enumerate(events)
    ]
    perturbed = Trace(meta=perturbed_meta(op_name="data_type_corrupt"), events=tuple(events))
    return three_step_clean, perturbed
