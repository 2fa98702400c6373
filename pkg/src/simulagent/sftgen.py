"""Supervised fine-tuning corpora: full-sentence records and wait-k prefix pairs."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .agents import Memory, PromptTemplate, render_prompt
from .core import SentencePair
from .errors import InvalidK, SampleTooLarge
from .tokenization import split_words

FULL = "full"
WAITK = "waitk"


@dataclass(frozen=True)
class PrefixPair:
    source_prefix: tuple[str, ...]
    target_prefix: tuple[str, ...]
    j: int
    i: int


@dataclass(frozen=True)
class SftRecord:
    prompt: str
    completion: str
    meta: dict

    def to_json(self) -> str:
        return json.dumps(
            {"prompt": self.prompt, "completion": self.completion, "meta": self.meta},
            ensure_ascii=False,
        )


def build_prefix_pair(pair: SentencePair, k: int, rng: random.Random) -> PrefixPair:
    """Draw a wait-k prefix pair.

    When ``k >= J`` the whole pair is returned.  Otherwise ``j`` is uniform on
    ``[k, J]`` and the target keeps ``i = min(j - k + 1, I)`` words, which is
    always >= 1.
    """
    if k < 1:
        raise InvalidK(f"wait-k needs k >= 1, got {k}")
    J, I = pair.J, pair.I  # noqa: E741
    if k >= J:
        return PrefixPair(pair.source_words, pair.target_words, J, I)
    j = rng.randint(k, J)
    i = min(j - k + 1, I)
    return PrefixPair(pair.source_words[:j], pair.target_words[:i], j, i)


def _pair_rng(seed: int, index: int, sample: int) -> random.Random:
    # Per-sentence seeds keep output independent of how generation is partitioned.
    return random.Random(f"{seed}:{index}:{sample}")


def build_sft_corpus(
    pairs: Sequence[SentencePair],
    kind: str = FULL,
    *,
    k: int | None = None,
    template: PromptTemplate | None = None,
    instruction: str = "",
    seed: int = 0,
    sample_size: int | None = None,
    samples_per_pair: int = 1,
) -> list[SftRecord]:
    if not pairs:
        raise ValueError("no sentence pairs")
    if kind not in (FULL, WAITK):
        raise ValueError(f"unknown record kind {kind!r}")
    if kind == WAITK and (k is None or k < 1):
        raise InvalidK("wait-k records need k >= 1")
    if samples_per_pair < 1:
        raise ValueError("samples_per_pair must be >= 1")
    template = template or PromptTemplate()

    indices = list(range(len(pairs)))
    if sample_size is not None:
        if sample_size > len(pairs):
            raise SampleTooLarge(f"sample of {sample_size} from a corpus of {len(pairs)}")
        indices = sorted(random.Random(seed).sample(indices, sample_size))

    records = []
    for idx in indices:
        pair = pairs[idx]
        if kind == FULL:
            mem = Memory(instruction, list(pair.source_words))
            records.append(SftRecord(
                render_prompt(template, mem),
                " ".join(pair.target_words),
                {"id": pair.id, "kind": FULL},
            ))
            continue
        for s in range(samples_per_pair):
            pp = build_prefix_pair(pair, k, _pair_rng(seed, idx, s))
            mem = Memory(instruction, list(pp.source_prefix))
            records.append(SftRecord(
                render_prompt(template, mem),
                " ".join(pp.target_prefix),
                {"id": pair.id, "kind": WAITK, "k": k, "j": pp.j, "i": pp.i},
            ))
    return records


def write_records(path: str | Path, records: Iterable[SftRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(r.to_json() + "\n")


def read_parallel(src_path: str | Path, tgt_path: str | Path) -> list[SentencePair]:
    """Two line-aligned files; ids are 0-based line numbers."""
    with open(src_path, encoding="utf-8") as f:
        src = f.read().splitlines()
    with open(tgt_path, encoding="utf-8") as f:
        tgt = f.read().splitlines()
    if len(src) != len(tgt):
        raise ValueError(f"{src_path} has {len(src)} lines but {tgt_path} has {len(tgt)}")
    return [SentencePair(str(n), split_words(s), split_words(t)) for n, (s, t) in enumerate(zip(src, tgt))]


def read_jsonl_corpus(path: str | Path) -> list[SentencePair]:
    """JSON Lines with ``{"id", "src", "tgt"}`` per sentence."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append(SentencePair(str(obj["id"]), split_words(obj["src"]), split_words(obj["tgt"])))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ValueError(f"{path}:{lineno}: bad corpus record ({e})") from e
    return pairs
