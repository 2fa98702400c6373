"""Deterministic word splitting and subword-style tokenization.

Real subword tokenizers are out of reach here, so ``fixed-chunk`` stands in for
BPE: each word is cut into pieces of at most ``n`` Unicode code points.  Real
segmentations can still be plugged in through an external map file holding,
per sentence, the number of tokens of every word (``1 3 2`` = three words of
1, 3 and 2 tokens).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import Tokenization
from .errors import EmptySentence, IndexOutOfRange, MapMismatch

WHITESPACE = "whitespace"
FIXED_CHUNK = "fixed-chunk"
EXTERNAL_MAP = "external-map"


@dataclass(frozen=True)
class TokenizerScheme:
    variant: str = WHITESPACE
    n: int | None = None
    counts: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.variant == FIXED_CHUNK:
            if self.n is None or self.n < 1:
                raise ValueError("fixed-chunk tokenization needs n >= 1")
        elif self.variant == EXTERNAL_MAP:
            if self.counts is None:
                raise ValueError("external-map tokenization needs per-word token counts")
            object.__setattr__(self, "counts", tuple(self.counts))
        elif self.variant != WHITESPACE:
            raise ValueError(f"unknown tokenizer variant {self.variant!r}")

    @classmethod
    def whitespace(cls) -> "TokenizerScheme":
        return cls(WHITESPACE)

    @classmethod
    def fixed_chunk(cls, n: int) -> "TokenizerScheme":
        return cls(FIXED_CHUNK, n=n)

    @classmethod
    def external(cls, counts: Sequence[int]) -> "TokenizerScheme":
        return cls(EXTERNAL_MAP, counts=tuple(counts))


def split_words(text: str) -> list[str]:
    words = text.split()
    if not words:
        raise EmptySentence("sentence is empty or whitespace only")
    return words


def _chunk(word: str, n: int) -> list[str]:
    return [word[i:i + n] for i in range(0, len(word), n)]


def _split_even(word: str, pieces: int) -> list[str]:
    # Near-even split; pieces beyond len(word) are empty, which byte-level
    # tokenizers can legitimately produce for short multi-byte words.
    q, r = divmod(len(word), pieces)
    out, pos = [], 0
    for p in range(pieces):
        size = q + (1 if p < r else 0)
        out.append(word[pos:pos + size])
        pos += size
    return out


def tokenize(words: Sequence[str], scheme: TokenizerScheme | None = None) -> Tokenization:
    scheme = scheme or TokenizerScheme.whitespace()
    if not words:
        raise EmptySentence("cannot tokenize an empty word sequence")

    if scheme.variant == WHITESPACE:
        pieces = [[w] for w in words]
    elif scheme.variant == FIXED_CHUNK:
        pieces = [_chunk(w, scheme.n) for w in words]
    else:
        counts = scheme.counts
        if len(counts) != len(words):
            raise MapMismatch(
                f"boundary map lists {len(counts)} words but the sentence has {len(words)}"
            )
        if any(c < 1 for c in counts):
            raise MapMismatch("every word needs at least one token")
        pieces = [_split_even(w, c) for w, c in zip(words, counts)]

    tokens, word_of_token, final = [], [], []
    for idx, toks in enumerate(pieces, start=1):
        for pos, tok in enumerate(toks):
            tokens.append(tok)
            word_of_token.append(idx)
            final.append(pos == len(toks) - 1)
    return Tokenization(tuple(tokens), tuple(word_of_token), tuple(final))


def complete_words_in_prefix(tok: Tokenization, n_tokens: int) -> int:
    """Number of words whose every token lies within the first ``n_tokens`` tokens."""
    if not 0 <= n_tokens <= tok.token_count:
        raise IndexOutOfRange(f"n_tokens={n_tokens} outside [0, {tok.token_count}]")
    return sum(tok.is_word_final[:n_tokens])


def load_external_map(path: str | Path) -> list[tuple[int, ...]]:
    """Read a boundary map file: one sentence per line, token count per word."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            try:
                counts = tuple(int(x) for x in line.split())
            except ValueError as e:
                raise MapMismatch(f"{path}:{lineno}: non-integer token count") from e
            out.append(counts)
    return out


def parse_scheme(spec: str) -> tuple[str, object]:
    """Parse a CLI scheme string: ``whitespace``, ``chunk:N`` or ``map:PATH``.

    Returns ``(kind, arg)``; ``map`` schemes are resolved per sentence by the
    caller since each line of the map file belongs to one sentence.
    """
    if spec == WHITESPACE:
        return WHITESPACE, None
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise ValueError(f"unknown tokenizer scheme {spec!r}")
    if kind in ("chunk", FIXED_CHUNK):
        return FIXED_CHUNK, int(arg)
    if kind in ("map", EXTERNAL_MAP):
        return EXTERNAL_MAP, load_external_map(arg)
    raise ValueError(f"unknown tokenizer scheme {spec!r}")


def scheme_for(parsed: tuple[str, object], index: int) -> TokenizerScheme:
    kind, arg = parsed
    if kind == WHITESPACE:
        return TokenizerScheme.whitespace()
    if kind == FIXED_CHUNK:
        return TokenizerScheme.fixed_chunk(arg)
    if index >= len(arg):
        raise MapMismatch(f"boundary map has {len(arg)} lines, sentence {index + 1} missing")
    return TokenizerScheme.external(arg[index])
