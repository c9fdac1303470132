"""Artifact dependency graph and contamination scoping.

Every event that produces an artifact records its upstream dependencies;
collecting those edges yields a DAG over artifact ids. Ids that are consumed
but never produced in-trace (the original attachment, for instance) become
source nodes. Contamination scope is plain forward reachability from the
perturbed ids.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .events import Trace


class CycleDetected(Exception):
    """The dependency graph has a cycle, which a well-formed log cannot produce."""

    def __init__(self, ids: list[str]) -> None:
        self.ids = ids
        super().__init__(f"provenance cycle involving {', '.join(ids)}")


@dataclass(frozen=True)
class DanglingReference:
    """An upstream id consumed before the event that produces it."""

    artifact_id: str
    event_index: int


@dataclass(frozen=True)
class ProvenanceGraph:
    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]
    producer: dict  # artifact id -> producing event index
    external_inputs: frozenset[str]
    warnings: tuple[DanglingReference, ...] = ()

    def successors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {node: [] for node in self.nodes}
        for upstream, downstream in sorted(self.edges):
            out[upstream].append(downstream)
        return out

    def predecessors(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {node: [] for node in self.nodes}
        for upstream, downstream in sorted(self.edges):
            out[downstream].append(upstream)
        return out


def build_graph(trace: Trace) -> ProvenanceGraph:
    """Collect one node per artifact id and one edge per recorded dependency.

    Ids produced more than once keep their first producer (later writes are
    treated as updates, their dependencies still contribute edges). Forward
    references — an id consumed before it is produced — are reported as
    warnings, not failures. A genuine cycle raises CycleDetected.
    """
    nodes: set[str] = set()
    edges: set[tuple[str, str]] = set()
    producer: dict[str, int] = {}
    warnings: list[DanglingReference] = []

    for event in trace.events:
        if event.produced_id is not None and event.produced_id not in producer:
            producer[event.produced_id] = event.index
            nodes.add(event.produced_id)

    for event in trace.events:
        if event.produced_id is None:
            continue
        for upstream in event.upstream_ids:
            nodes.add(upstream)
            edges.add((upstream, event.produced_id))
            produced_at = producer.get(upstream)
            if produced_at is not None and produced_at > event.index:
                warnings.append(DanglingReference(upstream, event.index))

    external = frozenset(nodes - set(producer))

    # Kahn's algorithm; anything left over sits on a cycle.
    indegree = {node: 0 for node in nodes}
    for _, downstream in edges:
        indegree[downstream] += 1
    queue = deque(sorted(node for node, deg in indegree.items() if deg == 0))
    seen = 0
    succ: dict[str, list[str]] = {node: [] for node in nodes}
    for upstream, downstream in sorted(edges):
        succ[upstream].append(downstream)
    while queue:
        node = queue.popleft()
        seen += 1
        for nxt in succ[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    if seen != len(nodes):
        cyclic = sorted(node for node, deg in indegree.items() if deg > 0)
        raise CycleDetected(cyclic)

    return ProvenanceGraph(
        nodes=frozenset(nodes),
        edges=frozenset(edges),
        producer=producer,
        external_inputs=external,
        warnings=tuple(warnings),
    )


def contamination_scope(graph: ProvenanceGraph, perturbed_ids: set[str]) -> set[str]:
    """Forward-reachability closure of the perturbed ids, seeds included.

    Ids not present in the graph are ignored.
    """
    known = {pid for pid in perturbed_ids if pid in graph.nodes}
    succ = graph.successors()
    scope = set(known)
    worklist = deque(sorted(known))
    while worklist:
        node = worklist.popleft()
        for nxt in succ[node]:
            if nxt not in scope:
                scope.add(nxt)
                worklist.append(nxt)
    return scope


def _backward_closure(graph: ProvenanceGraph, seeds) -> set[str]:
    pred = graph.predecessors()
    closure = {s for s in seeds if s in graph.nodes}
    worklist = deque(sorted(closure))
    while worklist:
        node = worklist.popleft()
        for prev in pred[node]:
            if prev not in closure:
                closure.add(prev)
                worklist.append(prev)
    return closure


def outcome_contaminated(trace: Trace, perturbed_ids: set[str]) -> bool:
    """True iff the task outcome depends, transitively, on a perturbed id."""
    outcome = trace.task_outcome()
    if outcome is None:
        return False
    graph = build_graph(trace)
    scope = contamination_scope(graph, perturbed_ids)
    upstream_closure = _backward_closure(graph, outcome.upstream_ids)
    return bool(upstream_closure & scope)


def to_dot(graph: ProvenanceGraph, contaminated: set[str] | None = None) -> str:
    """Graphviz DOT rendering, with the contamination scope highlighted."""
    contaminated = contaminated or set()
    lines = ["digraph provenance {"]
    for node in sorted(graph.nodes):
        attrs = []
        if node in graph.external_inputs:
            attrs.append("shape=box")
        if node in contaminated:
            attrs.append("style=filled")
            attrs.append("fillcolor=salmon")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f'  "{node}"{suffix};')
    for upstream, downstream in sorted(graph.edges):
        lines.append(f'  "{upstream}" -> "{downstream}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
