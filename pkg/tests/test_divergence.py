from __future__ import annotations

import functools
import random

import pytest

from conftest import routing, task_outcome, tool
from trace_contam.divergence import (
    DELETE,
    INSERT,
    KIND_DELETION,
    KIND_INSERTION,
    KIND_NONE,
    KIND_OUTCOME_PRESENCE,
    KIND_REROUTE,
    KIND_TOOL_MISMATCH,
    MATCH,
    SUBSTITUTE,
    SequenceTooLong,
    edit_cost,
    edit_distance,
    first_divergence,
    normalized_divergence,
    replay,
)
from trace_contam.events import EventKind
from trace_contam.signatures import Signature, signature_of, signature_sequence


def oracle_edit_distance(a: tuple, b: tuple) -> int:
    """Memoized brute force over all edit scripts; the independent reference
    the DP is checked against."""

    @functools.lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        best = go(i + 1, j + 1) + (a[i] != b[j])
        via_delete = go(i + 1, j) + 1
        if via_delete < best:
            best = via_delete
        via_insert = go(i, j + 1) + 1
        if via_insert < best:
            best = via_insert
        return best

    result = go(0, 0)
    go.cache_clear()
    return result


# A four-signature alphabet, as first-class Signature values.
SIGMA = (
    Signature(EventKind.ROUTING_DECISION, (("chosen_agent", "a"),)),
    Signature(EventKind.ROUTING_DECISION, (("chosen_agent", "b"),)),
    Signature(EventKind.TOOL_INVOCATION,
              (("tool_name", "t"), ("operation", "o"), ("success", "true"))),
    Signature(EventKind.MEMORY_WRITE, (("entry_type", "note"),)),
)


def random_sequence(rng: random.Random, max_len: int, alphabet=SIGMA) -> list[Signature]:
    return [rng.choice(alphabet) for _ in range(rng.randrange(max_len + 1))]


def test_oracle_sanity():
    assert oracle_edit_distance((), ()) == 0
    assert oracle_edit_distance((1,), (1,)) == 0
    assert oracle_edit_distance((1,), (2,)) == 1
    assert oracle_edit_distance((1, 2, 3), (1, 3)) == 1
    assert oracle_edit_distance(tuple("kitten"), tuple("sitting")) == 3


def test_identity_alignment_is_all_match():
    seq = [SIGMA[0], SIGMA[1], SIGMA[2]]
    alignment = edit_distance(seq, seq)
    assert alignment.cost == 0
    assert all(op.op == MATCH for op in alignment.ops)


def test_empty_versus_n_is_all_inserts():
    seq = [SIGMA[0]] * 4
    alignment = edit_distance([], seq)
    assert alignment.cost == 4
    assert all(op.op == INSERT for op in alignment.ops)
    assert edit_distance(seq, []).cost == 4
    assert all(op.op == DELETE for op in edit_distance(seq, []).ops)


def test_cost_matches_oracle_on_random_small_pairs():
    rng = random.Random(1009)
    for _ in range(2000):
        a = random_sequence(rng, 6)
        b = random_sequence(rng, 6)
        expected = oracle_edit_distance(tuple(a), tuple(b))
        assert edit_cost(a, b) == expected
        assert edit_distance(a, b).cost == expected


def test_alignment_cost_equals_non_match_op_count():
    rng = random.Random(77)
    for _ in range(300):
        a = random_sequence(rng, 8)
        b = random_sequence(rng, 8)
        alignment = edit_distance(a, b)
        assert alignment.cost == sum(1 for op in alignment.ops if op.op != MATCH)


def test_alignment_replays_clean_into_perturbed():
    rng = random.Random(88)
    for _ in range(300):
        a = random_sequence(rng, 10)
        b = random_sequence(rng, 10)
        alignment = edit_distance(a, b)
        assert replay(alignment, a, b) == b


def test_alignment_consumes_indices_in_order():
    rng = random.Random(99)
    for _ in range(100):
        a = random_sequence(rng, 10)
        b = random_sequence(rng, 10)
        alignment = edit_distance(a, b)
        clean_seen = [op.i for op in alignment.ops if op.i is not None]
        pert_seen = [op.j for op in alignment.ops if op.j is not None]
        assert clean_seen == list(range(len(a)))
        assert pert_seen == list(range(len(b)))


def test_deterministic_alignments_across_runs():
    rng = random.Random(31337)
    for _ in range(100):
        a = random_sequence(rng, 12)
        b = random_sequence(rng, 12)
        assert edit_distance(a, b) == edit_distance(a, b)


def test_match_only_on_equal_substitute_only_on_unequal():
    rng = random.Random(2024)
    for _ in range(200):
        a = random_sequence(rng, 8)
        b = random_sequence(rng, 8)
        for op in edit_distance(a, b).ops:
            if op.op == MATCH:
                assert a[op.i] == b[op.j]
            elif op.op == SUBSTITUTE:
                assert a[op.i] != b[op.j]


def test_revenue_fixture_hand_values(revenue_pair):
    # Hand DP on the 3-vs-9 sequences: one shared prefix event, six inserted
    # detour events, two shared suffix events.
    clean, perturbed = revenue_pair
    a = signature_sequence(clean)
    b = signature_sequence(perturbed)
    assert oracle_edit_distance(tuple(a), tuple(b)) == 6
    alignment = edit_distance(a, b)
    assert alignment.cost == 6
    assert normalized_divergence(a, b) == pytest.approx(6 / 9, abs=1e-9)
    t_star, t_norm, kind = first_divergence(alignment, a, b)
    assert (t_star, kind) == (1, KIND_INSERTION)
    assert t_norm == pytest.approx(1 / 3, abs=1e-9)


def test_disjoint_alphabets_normalize_to_one():
    rng = random.Random(5)
    left = SIGMA[:2]
    right = SIGMA[2:]
    for _ in range(50):
        a = [rng.choice(left) for _ in range(rng.randrange(1, 8))]
        b = [rng.choice(right) for _ in range(rng.randrange(1, 8))]
        m, n = sorted((len(a), len(b)))
        assert edit_cost(a, b) == n  # m substitutions + (n - m) inserts
        assert normalized_divergence(a, b) == 1.0


def test_normalized_divergence_edge_cases():
    assert normalized_divergence([], []) == 0.0
    assert normalized_divergence([SIGMA[0]], [SIGMA[0]]) == 0.0
    assert 0.0 <= normalized_divergence([SIGMA[0]], [SIGMA[1]]) <= 1.0


def test_metric_axioms_quick():
    rng = random.Random(12)
    for _ in range(100):
        a = random_sequence(rng, 12)
        b = random_sequence(rng, 12)
        c = random_sequence(rng, 12)
        ab, ba = edit_cost(a, b), edit_cost(b, a)
        assert ab == ba
        assert ab >= 0
        assert (ab == 0) == (a == b)
        assert edit_cost(a, c) <= ab + edit_cost(b, c)


def test_prefix_lemma():
    rng = random.Random(13)
    for _ in range(100):
        prefix = random_sequence(rng, 6)
        p = len(prefix)
        a = prefix + [SIGMA[0]] + random_sequence(rng, 3)
        b = prefix + [SIGMA[1]] + random_sequence(rng, 3)
        while len(b) != len(a):
            b = prefix + [SIGMA[1]] + random_sequence(rng, 3)
        alignment = edit_distance(a, b)
        t_star, _, _ = first_divergence(alignment, a, b)
        assert t_star == p


def test_first_divergence_none_when_equal():
    seq = [SIGMA[0], SIGMA[2]]
    alignment = edit_distance(seq, seq)
    assert first_divergence(alignment, seq, seq) == (None, None, KIND_NONE)


def test_first_divergence_substitution_kinds():
    reroute_a = [signature_of(routing(0, "x"))]
    reroute_b = [signature_of(routing(0, "y"))]
    alignment = edit_distance(reroute_a, reroute_b)
    assert first_divergence(alignment, reroute_a, reroute_b)[2] == KIND_REROUTE

    tool_a = [signature_of(tool(0, "t", "op"))]
    tool_b = [signature_of(tool(0, "t", "op2"))]
    alignment = edit_distance(tool_a, tool_b)
    assert first_divergence(alignment, tool_a, tool_b)[2] == KIND_TOOL_MISMATCH

    outcome_a = [signature_of(task_outcome(0, "x"))]
    other_b = [signature_of(tool(0, "t", "op"))]
    alignment = edit_distance(outcome_a, other_b)
    assert first_divergence(alignment, outcome_a, other_b)[2] == KIND_OUTCOME_PRESENCE


def test_first_divergence_trailing_insert_maps_to_clean_length():
    a = [SIGMA[0]]
    b = [SIGMA[0], SIGMA[1]]
    alignment = edit_distance(a, b)
    t_star, t_norm, kind = first_divergence(alignment, a, b)
    assert (t_star, kind) == (1, KIND_INSERTION)
    assert t_norm == 1.0


def test_first_divergence_deletion():
    a = [SIGMA[0], SIGMA[1], SIGMA[2]]
    b = [SIGMA[0], SIGMA[2]]
    alignment = edit_distance(a, b)
    t_star, _, kind = first_divergence(alignment, a, b)
    assert (t_star, kind) == (1, KIND_DELETION)


def test_denominator_choice():
    a = [SIGMA[0], SIGMA[1]]
    b = [SIGMA[0], SIGMA[2], SIGMA[1], SIGMA[3]]
    alignment = edit_distance(a, b)
    _, norm_clean, _ = first_divergence(alignment, a, b, denominator="clean")
    _, norm_max, _ = first_divergence(alignment, a, b, denominator="max")
    assert norm_clean == pytest.approx(1 / 2)
    assert norm_max == pytest.approx(1 / 4)


def test_sequence_too_long_budget():
    seq = [SIGMA[0]] * 200
    with pytest.raises(SequenceTooLong):
        edit_cost(seq, seq, cell_budget=100)
    with pytest.raises(SequenceTooLong):
        edit_distance(seq, seq, cell_budget=100)


def test_pure_python_path_agrees_with_numpy(monkeypatch):
    import trace_contam.divergence as div

    rng = random.Random(314)
    cases = [(random_sequence(rng, 90), random_sequence(rng, 90)) for _ in range(20)]
    with_numpy = [(edit_cost(a, b), edit_distance(a, b)) for a, b in cases]
    monkeypatch.setattr(div, "_np", None)
    without_numpy = [(edit_cost(a, b), edit_distance(a, b)) for a, b in cases]
    assert with_numpy == without_numpy
