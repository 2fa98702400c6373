"""Latency, quality, hallucination and difficulty metrics.

Latency is measured over words, never subword tokens: word-level schedules
compared against token-level AL numbers are not comparable.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .core import AlignmentSet, WordPolicy
from .errors import AlignmentFormatError, TooFewSentences, Undefined

LEVELS = ("Easy", "Medium", "Hard")


def average_lagging(g: WordPolicy | Sequence[int], J: int, I: int) -> float:  # noqa: E741
    """Average Lagging of a word-level schedule.

    ``tau`` is the first target position whose schedule covers the whole
    source (or the schedule length if none does), ``r = I / J``, and
    ``AL = mean over i <= tau of g_i - (i - 1) / r``.
    """
    gs = g.g if isinstance(g, WordPolicy) else tuple(g)
    if I <= 0 or not gs:
        raise Undefined("average lagging is undefined for an empty target")
    if J <= 0:
        raise Undefined("average lagging is undefined for an empty source")
    r = I / J
    tau = next((i for i, gi in enumerate(gs, start=1) if gi >= J), len(gs))
    return sum(gs[i - 1] - (i - 1) / r for i in range(1, tau + 1)) / tau


def corpus_average_lagging(items: Sequence[tuple[Sequence[int], int, int]]) -> float:
    if not items:
        raise Undefined("no sentences")
    return sum(average_lagging(g, J, I) for g, J, I in items) / len(items)


def _ngrams(words: Sequence[str], n: int) -> Counter:
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


@dataclass(frozen=True)
class BleuScore:
    score: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int
    zero_precision: bool = False

    def __float__(self) -> float:
        return self.score


def _bleu_stats(hyp: Sequence[str], ref: Sequence[str], max_n: int):
    matches, totals = [0] * max_n, [0] * max_n
    for n in range(1, max_n + 1):
        h, r = _ngrams(hyp, n), _ngrams(ref, n)
        matches[n - 1] = sum(min(c, r[g]) for g, c in h.items())
        totals[n - 1] = max(len(hyp) - n + 1, 0)
    return matches, totals


def _combine(matches, totals, hyp_len, ref_len, smooth_from: int | None = None) -> BleuScore:
    max_n = len(matches)
    if smooth_from is not None:
        matches = [m + (1 if n + 1 >= smooth_from else 0) for n, m in enumerate(matches)]
        totals = [t + (1 if n + 1 >= smooth_from else 0) for n, t in enumerate(totals)]
    # An order with no n-grams anywhere in the hypotheses (0/0) is vacuous and
    # counts as 1, so a corpus of short sentences still scores 100 against itself.
    precisions = tuple(m / t if t else 1.0 for m, t in zip(matches, totals))
    bp = 0.0 if hyp_len == 0 else min(1.0, math.exp(1 - ref_len / hyp_len))
    if hyp_len == 0 or any(p == 0 for p in precisions):
        return BleuScore(0.0, precisions, bp, hyp_len, ref_len, zero_precision=True)
    log_avg = sum(math.log(p) for p in precisions) / max_n
    return BleuScore(100.0 * bp * math.exp(log_avg), precisions, bp, hyp_len, ref_len)


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str], max_n: int = 4) -> BleuScore:
    """Unsmoothed corpus BLEU over whitespace tokens, one reference per hypothesis.

    Any order with zero clipped matches makes the score 0 and sets
    ``zero_precision``.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    if not references:
        raise ValueError("references must not be empty")
    matches, totals = [0] * max_n, [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h, r = hyp.split(), ref.split()
        m, t = _bleu_stats(h, r, max_n)
        matches = [a + b for a, b in zip(matches, m)]
        totals = [a + b for a, b in zip(totals, t)]
        hyp_len += len(h)
        ref_len += len(r)
    return _combine(matches, totals, hyp_len, ref_len)


def sentence_bleu(hypothesis: str, reference: str, max_n: int = 4) -> BleuScore:
    """Sentence BLEU with add-one smoothing on n-gram orders >= 2."""
    h, r = hypothesis.split(), reference.split()
    m, t = _bleu_stats(h, r, max_n)
    return _combine(m, t, len(h), len(r), smooth_from=2)


def hallucination_rate(target_len: int | Sequence[str], alignment: AlignmentSet) -> float:
    """Fraction of target words with no aligned source word."""
    I = target_len if isinstance(target_len, int) else len(target_len)  # noqa: E741
    if I <= 0:
        raise Undefined("hallucination rate is undefined for an empty translation")
    aligned = alignment.aligned_targets()
    if any(t > I for t in aligned):
        raise IndexError("alignment refers to target positions beyond the translation")
    return (I - len(aligned)) / I


def corpus_hallucination_rate(items: Sequence[tuple[int, AlignmentSet]]) -> float:
    total = sum(I for I, _ in items)
    if total == 0:
        raise Undefined("hallucination rate is undefined for an empty corpus")
    unaligned = sum(I - len(a.aligned_targets()) for I, a in items)
    return unaligned / total


class _Fenwick:
    def __init__(self, n: int):
        self.tree = [0] * (n + 1)

    def add(self, i: int) -> None:
        while i < len(self.tree):
            self.tree[i] += 1
            i += i & -i

    def prefix(self, i: int) -> int:
        s = 0
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s


def count_nonmonotonic(alignment: AlignmentSet) -> tuple[int, int]:
    """Count crossing edge pairs and their largest target distance.

    A pair crosses when one edge has a smaller source index but a larger
    target index than the other.  Runs in O(|A| log |A|).
    """
    edges = sorted(alignment.edges)
    if not edges:
        return 0, 0
    max_t = max(t for _, t in edges)
    tree = _Fenwick(max_t)
    seen = 0
    best_prev_t = 0
    crossings = max_dist = 0
    k = 0
    while k < len(edges):
        # edges sharing a source index never cross each other
        group_end = k
        while group_end < len(edges) and edges[group_end][0] == edges[k][0]:
            group_end += 1
        group = edges[k:group_end]
        for _, t in group:
            crossings += seen - tree.prefix(t)
            if best_prev_t > t:
                max_dist = max(max_dist, best_prev_t - t)
        for _, t in group:
            tree.add(t)
            best_prev_t = max(best_prev_t, t)
        seen += len(group)
        k = group_end
    return crossings, max_dist


def difficulty_split(
    alignments: Mapping[str, AlignmentSet] | Sequence[tuple[str, AlignmentSet]],
) -> dict[str, list[str]]:
    """Partition sentences into Easy/Medium/Hard thirds by reordering.

    Sort key is ``(crossings, max_distance, id)``; groups are contiguous and
    their sizes differ by at most one, with any remainder going to the easier
    groups first.
    """
    items = list(alignments.items()) if isinstance(alignments, Mapping) else list(alignments)
    if len(items) < 3:
        raise TooFewSentences(f"need at least 3 sentences, got {len(items)}")
    keyed = sorted((count_nonmonotonic(a) + (sid,)) for sid, a in items)
    n = len(keyed)
    q, rem = divmod(n, 3)
    out, start = {}, 0
    for lvl, name in enumerate(LEVELS):
        size = q + (1 if lvl < rem else 0)
        out[name] = [k[2] for k in keyed[start:start + size]]
        start += size
    return out


def parse_pharaoh(line: str) -> AlignmentSet:
    """Parse ``0-0 1-2 ...`` (0-based on disk) into a 1-based alignment set."""
    edges = set()
    for item in line.split():
        s, sep, t = item.partition("-")
        if not sep:
            raise AlignmentFormatError(f"bad alignment item {item!r}")
        try:
            si, ti = int(s), int(t)
        except ValueError as e:
            raise AlignmentFormatError(f"bad alignment item {item!r}") from e
        if si < 0 or ti < 0:
            raise AlignmentFormatError(f"negative index in {item!r}")
        edges.add((si + 1, ti + 1))
    return AlignmentSet(frozenset(edges))


def format_pharaoh(alignment: AlignmentSet) -> str:
    return " ".join(f"{s - 1}-{t - 1}" for s, t in sorted(alignment.edges))


def load_pharaoh(path: str | Path) -> list[AlignmentSet]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            try:
                out.append(parse_pharaoh(line))
            except AlignmentFormatError as e:
                raise AlignmentFormatError(f"{path}:{lineno}: {e}") from e
    return out


@dataclass
class EvalReport:
    AL: float | None = None
    BLEU: float | None = None
    HR: float | None = None
    speed: float | None = None
    speed_reliable: bool | None = None
    bleu_detail: dict | None = None
    per_sentence: list[dict] = field(default_factory=list)
    difficulty: dict[str, dict] | None = None
    config: dict = field(default_factory=dict)
    version: str = ""

    def __post_init__(self):
        if self.BLEU is not None and not 0.0 <= self.BLEU <= 100.0:
            raise ValueError("BLEU out of range")
        if self.HR is not None and not 0.0 <= self.HR <= 1.0:
            raise ValueError("HR out of range")

    def to_json(self) -> dict:
        return asdict(self)
