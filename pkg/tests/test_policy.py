import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_word_policy, simulate_waitk_tokens
from simulagent.core import BoundaryConfig, TokenPolicy, WordPolicy
from simulagent.errors import InvalidK, LengthMismatch, TraceFormatError
from simulagent.policy import (
    apply_boundary_restrictions,
    load_policy_traces,
    to_word_policy,
    validate_and_repair,
    wait_k_token_policy,
    wait_k_word_policy,
)
from simulagent.tokenization import TokenizerScheme, tokenize

WS = TokenizerScheme.whitespace()


def _words(n):
    return [f"w{i}" for i in range(1, n + 1)]


def test_wait_k_examples():
    # simulated alternation for k=3, M=5, N=5
    assert simulate_waitk_tokens(3, 5, 5) == [3, 4, 5, 5, 5]
    assert wait_k_token_policy(3, 5, 5).h == (3, 4, 5, 5, 5)
    assert wait_k_token_policy(1, 1, 4).h == (1, 1, 1, 1)
    assert wait_k_token_policy(10, 4, 2).h == (4, 4)
    with pytest.raises(InvalidK):
        wait_k_token_policy(0, 3, 3)


@given(st.integers(1, 12), st.integers(1, 15), st.integers(1, 15))
def test_wait_k_matches_simulation(k, M, N):
    assert list(wait_k_token_policy(k, M, N).h) == simulate_waitk_tokens(k, M, N)


def test_to_word_policy_full_read():
    src = tokenize(["ab", "cde", "f"], TokenizerScheme.fixed_chunk(2))
    tgt = tokenize(["x", "yy"], TokenizerScheme.fixed_chunk(1))
    M = src.token_count
    g = to_word_policy(TokenPolicy((M,) * tgt.token_count, M), src, tgt, 3)
    assert g.g == (3, 3)


def test_to_word_policy_multi_token_source():
    src = tokenize(["ab", "cde"], TokenizerScheme.fixed_chunk(2))
    tgt = tokenize(["x", "y"], WS)
    # h_1=2 -> u=1 -> g_1=2; h_2=3 -> u=2 -> g_2=min(3,2)=2
    assert to_word_policy([2, 3], src, tgt, 2).g == (2, 2)


def test_to_word_policy_whitespace():
    src = tokenize(_words(3), WS)
    tgt = tokenize(_words(3), WS)
    assert to_word_policy([1, 2, 3], src, tgt, 3).g == (2, 3, 3)


def test_to_word_policy_uses_last_token_of_target_word():
    src = tokenize(_words(4), WS)
    tgt = tokenize(["abc", "d"], TokenizerScheme.fixed_chunk(2))  # ab|c, d
    # entry for "ab" is ignored; "c" closes word 1 with h=2 -> u=2 -> g=3
    assert to_word_policy([1, 2, 3], src, tgt, 4).g == (3, 4)


def test_to_word_policy_length_mismatch():
    src = tokenize(_words(2), WS)
    tgt = tokenize(_words(2), WS)
    with pytest.raises(LengthMismatch):
        to_word_policy([1], src, tgt, 2)
    with pytest.raises(LengthMismatch):
        to_word_policy([1, 2], src, tgt, 3)


@st.composite
def conversion_case(draw):
    src_counts = draw(st.lists(st.integers(1, 3), min_size=1, max_size=6))
    tgt_counts = draw(st.lists(st.integers(1, 3), min_size=1, max_size=6))
    M, N = sum(src_counts), sum(tgt_counts)
    h = sorted(draw(st.lists(st.integers(1, M), min_size=N, max_size=N)))
    return src_counts, tgt_counts, h


def _tok(counts):
    return tokenize(["x" * c for c in counts], TokenizerScheme.external(counts))


@given(conversion_case())
def test_to_word_policy_matches_brute_force(case):
    src_counts, tgt_counts, h = case
    g = to_word_policy(h, _tok(src_counts), _tok(tgt_counts), len(src_counts))
    assert list(g.g) == brute_word_policy(h, src_counts, tgt_counts)
    assert all(a <= b for a, b in zip(g.g, g.g[1:]))


@given(st.integers(1, 8), st.integers(1, 10), st.integers(1, 10))
def test_wait_k_closed_form_under_whitespace(k, J, I):
    src, tgt = tokenize(_words(J), WS), tokenize(_words(I), WS)
    h = wait_k_token_policy(k, J, I)
    g = to_word_policy(h, src, tgt, J)
    sim = simulate_waitk_tokens(k, J, I)
    assert list(g.g) == [min(min(k + i - 1, J) + 1, J) for i in range(1, I + 1)]
    assert list(g.g) == [min(s + 1, J) for s in sim]


def test_boundary_worked_example():
    g = apply_boundary_restrictions([4], BoundaryConfig(1, 3), 5)
    assert g.g == (3,)


def test_boundary_loose_is_identity():
    J = 6
    g = WordPolicy((2, 3, 3, 5, 6, 6), J)
    assert apply_boundary_restrictions(g, BoundaryConfig(1, J), J) == g


def test_boundary_tight():
    for g in ([1, 1, 1], [3, 3, 3], [1, 2, 3]):
        assert apply_boundary_restrictions(g, BoundaryConfig(2, 2), 3).g == (2, 3, 3)


@st.composite
def policy_and_bounds(draw):
    J = draw(st.integers(1, 12))
    I = draw(st.integers(1, 12))  # noqa: E741
    g = sorted(draw(st.lists(st.integers(1, J), min_size=I, max_size=I)))
    B = draw(st.integers(1, 6))
    T = draw(st.integers(B, 10))
    return WordPolicy(tuple(g), J), BoundaryConfig(B, T), J


@given(policy_and_bounds())
def test_boundary_sandwich_and_idempotence(case):
    g, cfg, J = case
    r = apply_boundary_restrictions(g, cfg, J)
    for i, gi in enumerate(r.g, start=1):
        assert min(i - 1 + cfg.B, J) <= gi <= min(i - 1 + cfg.T, J)
    assert apply_boundary_restrictions(r, cfg, J) == r


def test_wait_k_word_policy():
    assert wait_k_word_policy(2, 4, 5).g == (2, 3, 4, 4, 4)


@pytest.mark.parametrize(
    "seq, upper, expected, kinds",
    [
        ([3, 2, 4], 4, [3, 3, 4], [(2, "raised")]),
        ([0, 5], 4, [1, 4], [(1, "clamped_low"), (2, "clamped_high")]),
        ([1, 2, 3], 3, [1, 2, 3], []),
    ],
)
def test_validate_and_repair(seq, upper, expected, kinds):
    out, report = validate_and_repair(seq, upper)
    assert out == expected
    assert [(r.index, r.kind) for r in report.repairs] == kinds


@given(st.lists(st.integers(-5, 20), min_size=1, max_size=15), st.integers(1, 12))
def test_repair_output_always_valid(seq, upper):
    out, report = validate_and_repair(seq, upper)
    WordPolicy(tuple(out), upper)
    if all(1 <= v <= upper for v in seq) and seq == sorted(seq):
        assert out == seq and not report


def test_load_policy_traces(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text('{"id": "s1", "h": [1, 2]}\n\n{"id": 7, "h": [3]}\n', encoding="utf-8")
    traces = load_policy_traces(path)
    assert [(t.sentence_id, t.h) for t in traces] == [("s1", (1, 2)), ("7", (3,))]


@pytest.mark.parametrize(
    "line",
    ['{"id": "a", "h": [1]}\n{"id": "b"', '{"id": "a", "h": [1]}\n{"id": "b", "h": []}',
     '{"id": "a", "h": [1]}\n{"id": "b", "h": ["x"]}', '{"id": "a", "h": [1]}\n[1, 2]'],
)
def test_load_policy_traces_errors_report_line(tmp_path, line):
    path = tmp_path / "t.jsonl"
    path.write_text(line, encoding="utf-8")
    with pytest.raises(TraceFormatError) as info:
        load_policy_traces(path)
    assert info.value.line == 2
    assert ":2:" in str(info.value)


def test_write_word_policies_format(tmp_path):
    from simulagent.policy import write_word_policies

    path = tmp_path / "g.jsonl"
    write_word_policies(path, [("a", WordPolicy((1, 2), 2))])
    assert json.loads(path.read_text()) == {"id": "a", "g": [1, 2]}
