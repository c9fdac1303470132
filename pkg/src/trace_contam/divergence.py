"""Minimum-edit alignment between signature sequences, normalized structural
edit distance, and the first divergence point.

All three edit operations cost 1. The backtrace breaks ties with a fixed
preference order (match, substitute, delete, insert), so alignments and the
first divergence point are deterministic across runs and platforms. Cost
computation uses a two-row sweep (vectorized with numpy for long sequences);
the full matrix is materialized only when an alignment is requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

try:
    import numpy as _np
except ImportError:  # pragma: no cover
    _np = None

from .events import EventKind
from .signatures import Signature

MATCH = "match"
SUBSTITUTE = "substitute"
DELETE = "delete"
INSERT = "insert"

KIND_NONE = "none"
KIND_REROUTE = "reroute"
KIND_TOOL_MISMATCH = "tool_mismatch"
KIND_ACTION_MISMATCH = "action_mismatch"
KIND_MEMORY_MISMATCH = "memory_mismatch"
KIND_OUTCOME_PRESENCE = "outcome_presence_mismatch"
KIND_INSERTION = "insertion"
KIND_DELETION = "deletion"

DEFAULT_CELL_BUDGET = 100_000_000

# Sequences below this DP size stay on the pure-Python path; numpy's per-call
# overhead dominates for small inputs.
_NUMPY_MIN_CELLS = 4096


class SequenceTooLong(Exception):
    """DP table would exceed the cell budget; chunk inputs or raise the budget."""

    def __init__(self, m: int, n: int, budget: int) -> None:
        self.m, self.n, self.budget = m, n, budget
        super().__init__(f"alignment of {m} x {n} signatures exceeds cell budget {budget}")


@dataclass(frozen=True)
class AlignOp:
    op: str
    i: int | None  # clean index; None for insert
    j: int | None  # perturbed index; None for delete


@dataclass(frozen=True)
class Alignment:
    ops: tuple[AlignOp, ...]
    cost: int


@dataclass(frozen=True)
class DivergenceReport:
    edit_distance: int
    d_norm: float
    t_star_raw: int | None
    t_star_norm: float | None
    first_kind: str

    def to_dict(self) -> dict:
        return {
            "edit_distance": self.edit_distance,
            "d_norm": self.d_norm,
            "t_star_raw": self.t_star_raw,
            "t_star_norm": self.t_star_norm,
            "first_kind": self.first_kind,
        }


def _check_budget(m: int, n: int, cell_budget: int) -> None:
    if m * n > cell_budget:
        raise SequenceTooLong(m, n, cell_budget)


def _encode(a: Sequence, b: Sequence) -> tuple[list[int], list[int]]:
    codes: dict = {}
    def code(item) -> int:
        got = codes.get(item)
        if got is None:
            got = len(codes)
            codes[item] = got
        return got
    return [code(x) for x in a], [code(x) for x in b]


def _cost_pure(a: list[int], b: list[int]) -> int:
    m, n = len(a), len(b)
    prev = list(range(n + 1))
    for i in range(1, m + 1):
        ai = a[i - 1]
        cur = [i] + [0] * n
        diag = prev[0]
        left = i
        for j in range(1, n + 1):
            up = prev[j]
            best = diag + (ai != b[j - 1])
            if up + 1 < best:
                best = up + 1
            if left + 1 < best:
                best = left + 1
            cur[j] = best
            diag = up
            left = best
        prev = cur
    return prev[n]


def _cost_numpy(a: list[int], b: list[int]) -> int:
    m, n = len(a), len(b)
    bv = _np.asarray(b, dtype=_np.int64)
    idx = _np.arange(n + 1, dtype=_np.int64)
    prev = idx.copy()
    cand = _np.empty(n + 1, dtype=_np.int64)
    for i in range(1, m + 1):
        cand[0] = i
        _np.minimum(prev[:-1] + (a[i - 1] != bv), prev[1:] + 1, out=cand[1:])
        # row[j] = min over k<=j of cand[k] + (j-k): a prefix-min scan.
        prev = _np.minimum.accumulate(cand - idx) + idx
    return int(prev[n])


def edit_cost(a: Sequence, b: Sequence, cell_budget: int = DEFAULT_CELL_BUDGET) -> int:
    """Minimum number of unit-cost substitutions/insertions/deletions."""
    m, n = len(a), len(b)
    _check_budget(m, n, cell_budget)
    if m == 0:
        return n
    if n == 0:
        return m
    ca, cb = _encode(a, b)
    if _np is not None and m * n >= _NUMPY_MIN_CELLS:
        return _cost_numpy(ca, cb)
    return _cost_pure(ca, cb)


def _full_matrix(a: list[int], b: list[int]):
    m, n = len(a), len(b)
    if _np is not None:
        dist = _np.empty((m + 1, n + 1), dtype=_np.int32)
        dist[0] = _np.arange(n + 1, dtype=_np.int32)
        idx = _np.arange(n + 1, dtype=_np.int64)
        bv = _np.asarray(b, dtype=_np.int64)
        cand = _np.empty(n + 1, dtype=_np.int64)
        for i in range(1, m + 1):
            prev = dist[i - 1].astype(_np.int64)
            cand[0] = i
            _np.minimum(prev[:-1] + (a[i - 1] != bv), prev[1:] + 1, out=cand[1:])
            dist[i] = _np.minimum.accumulate(cand - idx) + idx
        return dist
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    dist[0] = list(range(n + 1))
    for i in range(1, m + 1):
        row = dist[i]
        prev = dist[i - 1]
        row[0] = i
        ai = a[i - 1]
        for j in range(1, n + 1):
            best = prev[j - 1] + (ai != b[j - 1])
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            row[j] = best
    return dist


def edit_distance(a: Sequence, b: Sequence, cell_budget: int = DEFAULT_CELL_BUDGET) -> Alignment:
    """Full minimum-edit alignment with deterministic tie-breaking.

    The backtrace prefers match over substitute over delete over insert
    whenever several ops are optimal, which front-loads matches and makes the
    first divergence point reproducible.
    """
    m, n = len(a), len(b)
    _check_budget(m, n, cell_budget)
    ca, cb = _encode(a, b)
    dist = _full_matrix(ca, cb)
    ops: list[AlignOp] = []
    i, j = m, n
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and ca[i - 1] == cb[j - 1] and dist[i - 1][j - 1] == here:
            ops.append(AlignOp(MATCH, i - 1, j - 1))
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and dist[i - 1][j - 1] + 1 == here:
            ops.append(AlignOp(SUBSTITUTE, i - 1, j - 1))
            i -= 1
            j -= 1
        elif i > 0 and dist[i - 1][j] + 1 == here:
            ops.append(AlignOp(DELETE, i - 1, None))
            i -= 1
        else:
            ops.append(AlignOp(INSERT, None, j - 1))
            j -= 1
    ops.reverse()
    return Alignment(tuple(ops), int(dist[m][n]))


def replay(alignment: Alignment, a: Sequence, b: Sequence) -> list:
    """Apply alignment ops to ``a``; must reconstruct ``b`` exactly."""
    out = []
    for op in alignment.ops:
        if op.op == MATCH:
            out.append(a[op.i])
        elif op.op in (SUBSTITUTE, INSERT):
            out.append(b[op.j])
        # delete contributes nothing
    return out


def normalized_divergence(a: Sequence, b: Sequence, cell_budget: int = DEFAULT_CELL_BUDGET) -> float:
    """Edit distance divided by the longer length; 0.0 for two empty sequences."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return edit_cost(a, b, cell_budget) / longest


_SUBSTITUTION_KINDS = {
    EventKind.ROUTING_DECISION: KIND_REROUTE,
    EventKind.TOOL_INVOCATION: KIND_TOOL_MISMATCH,
    EventKind.TOOL_FAILURE: KIND_TOOL_MISMATCH,
    EventKind.AGENT_OUTPUT: KIND_ACTION_MISMATCH,
    EventKind.AGENT_HALT: KIND_ACTION_MISMATCH,
    EventKind.MEMORY_WRITE: KIND_MEMORY_MISMATCH,
    EventKind.MEMORY_READ: KIND_MEMORY_MISMATCH,
    EventKind.RETRIEVAL_SHOWN: KIND_MEMORY_MISMATCH,
}


def _substitution_kind(clean_sig: Signature, perturbed_sig: Signature) -> str:
    # A task outcome appearing on either side is a presence mismatch; halts
    # count as action changes, retrieval displays as memory-state changes.
    if EventKind.TASK_OUTCOME in (clean_sig.kind, perturbed_sig.kind):
        return KIND_OUTCOME_PRESENCE
    return _SUBSTITUTION_KINDS[clean_sig.kind]


def first_divergence(
    alignment: Alignment,
    a: Sequence[Signature],
    b: Sequence[Signature],
    denominator: str = "clean",
) -> tuple[int | None, float | None, str]:
    """Locate the earliest non-matching aligned op.

    Returns (t_star_raw, t_star_norm, first_kind). Insertions are pinned to
    the clean index of the next consumed clean event (or len(a) when the
    insertion trails everything), so t* always lives on the clean timeline.
    ``denominator`` selects len(a) ("clean", default) or max length ("max")
    for normalization.
    """
    ops = alignment.ops
    for position, op in enumerate(ops):
        if op.op == MATCH:
            continue
        if op.op == INSERT:
            t_star = next((later.i for later in ops[position + 1:] if later.i is not None), len(a))
            kind = KIND_INSERTION
        elif op.op == DELETE:
            t_star = op.i
            kind = KIND_DELETION
        else:
            t_star = op.i
            kind = _substitution_kind(a[op.i], b[op.j])
        denom = len(a) if denominator == "clean" else max(len(a), len(b))
        if denom == 0:
            t_norm = 0.0
        else:
            t_norm = min(1.0, max(0.0, t_star / denom))
        return t_star, t_norm, kind
    return None, None, KIND_NONE


def divergence_report(
    a: Sequence[Signature],
    b: Sequence[Signature],
    denominator: str = "clean",
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> tuple[DivergenceReport, Alignment]:
    """Alignment plus the packaged divergence metrics for one pair."""
    alignment = edit_distance(a, b, cell_budget)
    longest = max(len(a), len(b))
    d_norm = alignment.cost / longest if longest else 0.0
    t_star_raw, t_star_norm, first_kind = first_divergence(alignment, a, b, denominator)
    report = DivergenceReport(
        edit_distance=alignment.cost,
        d_norm=d_norm,
        t_star_raw=t_star_raw,
        t_star_norm=t_star_norm,
        first_kind=first_kind,
    )
    return report, alignment
