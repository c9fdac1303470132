"""Deterministic generator of paired clean/perturbed traces with known ground
truth, so the analysis pipeline can be exercised end to end without any model
backend.

Six scenarios cover the manifestation grid and each control-flow pattern:

    no_effect       identical signatures, identical answer
    silent          identical signatures, different answer
    detour_recover  inserted validation block (2x clean length), same answer
    reroute_fail    routing substitutions from a chosen point, different answer
    loop_fail       inserted periodic retry block, different answer
    early_term      truncation before the outcome, trailing halt

Every generated pair is built to clear the default analysis thresholds with
margin, so the analyzer's labels must agree with the recorded ground truth at
any valid clean length. Generation is a pure function of the scenario spec
(seed included); corpora are reproducible byte for byte.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

from .events import Condition, Event, EventKind, Trace, TraceMeta, params_digest, serialize_trace
from .records import MODALITY_DOCUMENT, MODALITY_TABULAR, PerturbationRecord
from .rng import CounterRng, derive_seed
from .taxonomy import ManifestationLabel

SCENARIO_NO_EFFECT = "no_effect"
SCENARIO_SILENT = "silent"
SCENARIO_DETOUR = "detour_recover"
SCENARIO_REROUTE = "reroute_fail"
SCENARIO_LOOP = "loop_fail"
SCENARIO_EARLY_TERM = "early_term"
SCENARIOS = (
    SCENARIO_NO_EFFECT,
    SCENARIO_SILENT,
    SCENARIO_DETOUR,
    SCENARIO_REROUTE,
    SCENARIO_LOOP,
    SCENARIO_EARLY_TERM,
)

# Names reserved for injected events so they can never collide with a clean
# signature; specs must not use them.
RESERVED_AGENT = "recovery_validator"
RESERVED_TOOLS = ("consistency_check", "retry_probe")

DEFAULT_AGENTS = ("coordinator", "data_analyst", "computation", "synthesizer")
DEFAULT_TOOLS = (
    ("table_tool", "parse_table"),
    ("python_exec", "run_snippet"),
    ("fact_check", "verify_claim"),
)

_ENTRY_TYPES = ("table", "note", "figure")
_SOURCE_ID = "input_main"

# Catalog operator each scenario pretends to have applied; keeps every
# generated record a valid catalog member.
_SCENARIO_OPS = {
    SCENARIO_NO_EFFECT: ("irrelevant_columns", MODALITY_TABULAR, ["col:2"]),
    SCENARIO_SILENT: ("unit_change", MODALITY_TABULAR, ["col:1"]),
    SCENARIO_DETOUR: ("data_type_corrupt", MODALITY_TABULAR, ["R1C1", "R2C1", "R3C1"]),
    SCENARIO_REROUTE: ("label_corrupt", MODALITY_TABULAR, ["header:0"]),
    SCENARIO_LOOP: ("ocr_noise", MODALITY_DOCUMENT, ["s1", "s2"]),
    SCENARIO_EARLY_TERM: ("encoding_error", MODALITY_DOCUMENT, ["s1"]),
}


class InvalidSpec(ValueError):
    """A scenario spec violates a generator precondition."""


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    seed: int
    clean_length: int = 8
    agents: tuple[str, ...] = DEFAULT_AGENTS
    tools: tuple[tuple[str, str], ...] = DEFAULT_TOOLS
    tokens_per_event: int = 100
    # clean-trace index the injection anchors to; scenario-specific default
    inject_at: int | None = None
    task_id: str | None = None


@dataclass(frozen=True)
class GroundTruth:
    label: ManifestationLabel
    patterns: frozenset[str]
    outcome_changed: bool
    injected_insertions: int
    t_star_raw: int | None

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "patterns": sorted(self.patterns),
            "outcome_changed": self.outcome_changed,
            "injected_insertions": self.injected_insertions,
            "t_star_raw": self.t_star_raw,
        }


def _validate_spec(spec: ScenarioSpec) -> None:
    if spec.scenario not in SCENARIOS:
        raise InvalidSpec(f"unknown scenario {spec.scenario!r}")
    if spec.clean_length < 3:
        raise InvalidSpec("clean_length must be at least 3 (routing, work, outcome)")
    if len(spec.agents) < 2:
        raise InvalidSpec("need at least two agents (a coordinator and a worker)")
    if RESERVED_AGENT in spec.agents:
        raise InvalidSpec(f"agent name {RESERVED_AGENT!r} is reserved for injected events")
    if not spec.tools:
        raise InvalidSpec("need at least one tool")
    if any(name in RESERVED_TOOLS for name, _ in spec.tools):
        raise InvalidSpec(f"tool names {RESERVED_TOOLS} are reserved for injected events")
    if spec.tokens_per_event < 1:
        raise InvalidSpec("tokens_per_event must be positive")
    if not 0 <= spec.seed < 1 << 64:
        raise InvalidSpec("seed must be a 64-bit unsigned integer")


def _routing_positions(length: int) -> list[int]:
    positions = [0]
    positions.extend(i for i in range(1, length - 2) if i % 4 == 0)
    return positions


def _task_id(spec: ScenarioSpec) -> str:
    return spec.task_id or f"{spec.scenario}_{spec.seed:016x}"


def _build_clean(spec: ScenarioSpec) -> Trace:
    task = _task_id(spec)
    coordinator = spec.agents[0]
    workers = spec.agents[1:] or spec.agents
    length = spec.clean_length
    events: list[Event] = []
    artifact = _SOURCE_ID
    artifact_counter = 0

    def add(kind: EventKind, agent: str, payload: dict,
            produced: str | None = None, upstream: tuple[str, ...] = ()) -> None:
        events.append(Event(
            index=len(events),
            kind=kind,
            agent=agent,
            payload=payload,
            token_count=spec.tokens_per_event,
            produced_id=produced,
            upstream_ids=upstream,
        ))

    add(EventKind.ROUTING_DECISION, coordinator, {"chosen_agent": workers[0]})
    for i in range(1, length - 2):
        slot = i % 4
        if slot == 0:
            add(EventKind.ROUTING_DECISION, coordinator,
                {"chosen_agent": workers[(i // 4) % len(workers)]})
        elif slot == 2:
            add(EventKind.MEMORY_WRITE, workers[(i // 4) % len(workers)],
                {"entry_id": f"mem_{i}", "entry_type": _ENTRY_TYPES[(i // 2) % len(_ENTRY_TYPES)]},
                produced=f"mem_{i}", upstream=(artifact,))
        else:
            tool_name, base_op = spec.tools[i % len(spec.tools)]
            artifact_counter += 1
            produced = f"art_{artifact_counter}"
            add(EventKind.TOOL_INVOCATION, workers[(i // 4) % len(workers)],
                {"tool_name": tool_name, "operation": f"{base_op}_{i}",
                 "params_digest": params_digest(f"{task}:{i}:clean"), "success": True},
                produced=produced, upstream=(artifact,))
            artifact = produced
    add(EventKind.AGENT_OUTPUT, spec.agents[-1],
        {"action": "synthesize_answer", "is_task_outcome": True},
        produced="draft_1", upstream=(artifact,))
    add(EventKind.TASK_OUTCOME, spec.agents[-1],
        {"answer": f"answer {spec.seed % 9973}"},
        produced="final_1", upstream=("draft_1",))

    meta = TraceMeta(
        task_id=task,
        model_id="simulated-v1",
        condition=Condition.CLEAN,
        seed=spec.seed,
    )
    return Trace(meta=meta, events=tuple(events))


def _scenario_record(spec: ScenarioSpec) -> PerturbationRecord:
    op_name, modality, locus = _SCENARIO_OPS[spec.scenario]
    return PerturbationRecord(
        op_name=op_name,
        modality=modality,
        locus=tuple(locus),
        params={"affected_evidence": [_SOURCE_ID]},
        seed=spec.seed,
    )


def _reindex(events: list[Event]) -> tuple[Event, ...]:
    return tuple(replace(event, index=i) for i, event in enumerate(events))


def _perturbed_meta(clean: Trace, spec: ScenarioSpec) -> TraceMeta:
    return replace(clean.meta, condition=Condition.PERTURBED, perturbation=_scenario_record(spec))


def _detour_block(spec: ScenarioSpec, count: int, upstream: str) -> list[Event]:
    events = []
    for k in range(count):
        if k % 2 == 0:
            events.append(Event(0, EventKind.ROUTING_DECISION, spec.agents[0],
                                {"chosen_agent": RESERVED_AGENT},
                                spec.tokens_per_event, None, ()))
        else:
            events.append(Event(0, EventKind.TOOL_INVOCATION, RESERVED_AGENT,
                                {"tool_name": RESERVED_TOOLS[0], "operation": f"probe_{k}",
                                 "params_digest": params_digest(f"probe:{k}"), "success": True},
                                spec.tokens_per_event, f"chk_{k}", (upstream,)))
    return events


def _loop_block(spec: ScenarioSpec, period: int, reps: int, upstream: str) -> list[Event]:
    events = []
    for rep in range(reps):
        for slot in range(period):
            if period >= 2 and slot == 0:
                events.append(Event(0, EventKind.ROUTING_DECISION, spec.agents[0],
                                    {"chosen_agent": RESERVED_AGENT},
                                    spec.tokens_per_event, None, ()))
            elif period == 3 and slot == 2:
                events.append(Event(0, EventKind.MEMORY_WRITE, RESERVED_AGENT,
                                    {"entry_id": f"retry_log_{rep}", "entry_type": "retry_log"},
                                    spec.tokens_per_event, f"retry_log_{rep}", (upstream,)))
            else:
                events.append(Event(0, EventKind.TOOL_INVOCATION, RESERVED_AGENT,
                                    {"tool_name": RESERVED_TOOLS[1], "operation": "retry",
                                     "params_digest": params_digest(f"retry:{rep}:{slot}"),
                                     "success": False},
                                    spec.tokens_per_event, f"retry_{rep}_{slot}", (upstream,)))
    return events


def _artifact_before(events: list[Event], position: int) -> str:
    for event in reversed(events[:position]):
        if event.kind is EventKind.TOOL_INVOCATION and event.produced_id:
            return event.produced_id
    return _SOURCE_ID


def _changed_answer(events: list[Event]) -> list[Event]:
    out = []
    for event in events:
        if event.kind is EventKind.TASK_OUTCOME:
            payload = dict(event.payload)
            payload["answer"] = payload["answer"] + " (corrupted)"
            event = replace(event, payload=payload)
        out.append(event)
    return out


def generate_pair(spec: ScenarioSpec) -> tuple[Trace, Trace, GroundTruth]:
    """Build one clean/perturbed pair plus its ground truth."""
    _validate_spec(spec)
    clean = _build_clean(spec)
    rng = CounterRng(derive_seed(spec.seed, spec.scenario))
    length = spec.clean_length
    events = list(clean.events)
    scenario = spec.scenario

    if scenario == SCENARIO_NO_EFFECT:
        perturbed_events = []
        for event in events:
            if event.kind is EventKind.TOOL_INVOCATION:
                payload = dict(event.payload)
                payload["params_digest"] = params_digest(f"{clean.meta.task_id}:perturbed")
                event = replace(event, payload=payload)
            perturbed_events.append(event)
        truth = GroundTruth(ManifestationLabel.NO_EFFECT, frozenset(), False, 0, None)

    elif scenario == SCENARIO_SILENT:
        perturbed_events = _changed_answer(events)
        truth = GroundTruth(ManifestationLabel.SILENT, frozenset(), True, 0, None)

    elif scenario == SCENARIO_DETOUR:
        insert_at = spec.inject_at if spec.inject_at is not None else 1 + rng.below(length - 2)
        if not 1 <= insert_at <= length - 2:
            raise InvalidSpec(f"inject_at must lie in [1, {length - 2}]")
        count = 2 * length
        block = _detour_block(spec, count, _artifact_before(events, insert_at))
        perturbed_events = events[:insert_at] + block + events[insert_at:]
        truth = GroundTruth(ManifestationLabel.DETOUR_RECOVERY,
                            frozenset({"extended_execution"}), False, count, insert_at)

    elif scenario == SCENARIO_REROUTE:
        eligible = [p for p in _routing_positions(length) if p <= length // 2]
        if spec.inject_at is not None:
            if spec.inject_at not in eligible:
                raise InvalidSpec(f"inject_at must be a routing position in {eligible}")
            start = spec.inject_at
        else:
            start = rng.choice(eligible)
        perturbed_events = []
        for event in events:
            if (event.kind is EventKind.ROUTING_DECISION and event.index >= start):
                payload = dict(event.payload)
                payload["chosen_agent"] = RESERVED_AGENT
                event = replace(event, payload=payload)
            perturbed_events.append(event)
        perturbed_events = _changed_answer(perturbed_events)
        truth = GroundTruth(ManifestationLabel.COMBINED,
                            frozenset({"rerouting"}), True, 0, start)

    elif scenario == SCENARIO_LOOP:
        insert_at = spec.inject_at if spec.inject_at is not None else 1 + rng.below(length - 2)
        if not 1 <= insert_at <= length - 2:
            raise InvalidSpec(f"inject_at must lie in [1, {length - 2}]")
        period = 1 + rng.below(3)
        # enough repetitions that d_norm clears epsilon at any clean length
        reps = max(2, math.ceil(0.15 * length / period))
        block = _loop_block(spec, period, reps, _artifact_before(events, insert_at))
        perturbed_events = events[:insert_at] + block + events[insert_at:]
        perturbed_events = _changed_answer(perturbed_events)
        truth = GroundTruth(ManifestationLabel.COMBINED,
                            frozenset({"looping"}), True, period * reps, insert_at)

    else:  # SCENARIO_EARLY_TERM
        max_cut = max(1, math.floor(0.6 * length))
        cut = spec.inject_at if spec.inject_at is not None else 1 + rng.below(max_cut)
        if not 1 <= cut <= max_cut:
            raise InvalidSpec(f"inject_at must lie in [1, {max_cut}]")
        halt = Event(0, EventKind.AGENT_HALT, spec.agents[0],
                     {"reason": "early_stop: upstream extraction unusable"},
                     spec.tokens_per_event, None, ())
        perturbed_events = events[:cut] + [halt]
        # t* is left unpinned: equal-cost alignments of a truncated suffix can
        # re-anchor matches when signatures recur, unlike the forced
        # reserved-signature alignments of the detour and reroute scenarios.
        truth = GroundTruth(ManifestationLabel.COMBINED,
                            frozenset({"early_termination"}), True, 0, None)

    perturbed = Trace(meta=_perturbed_meta(clean, spec), events=_reindex(perturbed_events))
    return clean, perturbed, truth


def generate_corpus(
    count_per_scenario: int,
    base_seed: int,
    clean_length_range: tuple[int, int] = (8, 20),
) -> list[tuple[Trace, Trace, GroundTruth]]:
    """count_per_scenario pairs of each scenario, seeds derived by counter.

    Pair i of scenario s gets task id ``task_{i * 6 + s:05d}``, so corpus
    order and on-disk order agree.
    """
    if count_per_scenario < 1:
        raise InvalidSpec("count_per_scenario must be at least 1")
    lo, hi = clean_length_range
    if lo < 3 or hi < lo:
        raise InvalidSpec("clean_length_range must satisfy 3 <= lo <= hi")
    corpus = []
    for i in range(count_per_scenario):
        for s, scenario in enumerate(SCENARIOS):
            pair_seed = derive_seed(base_seed, scenario, i)
            length = lo + CounterRng(pair_seed).below(hi - lo + 1)
            spec = ScenarioSpec(
                scenario=scenario,
                seed=pair_seed,
                clean_length=length,
                task_id=f"task_{i * len(SCENARIOS) + s:05d}",
            )
            corpus.append(generate_pair(spec))
    return corpus


def write_corpus(corpus: list[tuple[Trace, Trace, GroundTruth]], out_dir: str) -> list[str]:
    """Write task_XXXXX/{clean.trace,perturbed.trace,truth.record} per pair."""
    written = []
    for clean, perturbed, truth in corpus:
        task_dir = os.path.join(out_dir, clean.meta.task_id)
        os.makedirs(task_dir, exist_ok=True)
        with open(os.path.join(task_dir, "clean.trace"), "w", encoding="utf-8") as fh:
            fh.write(serialize_trace(clean))
        with open(os.path.join(task_dir, "perturbed.trace"), "w", encoding="utf-8") as fh:
            fh.write(serialize_trace(perturbed))
        with open(os.path.join(task_dir, "truth.record"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(truth.to_dict(), sort_keys=True) + "\n")
        written.append(task_dir)
    return written
