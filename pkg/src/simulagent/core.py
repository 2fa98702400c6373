"""Immutable domain types.

All word and token indices are 1-based, matching the usual notation for
simultaneous translation policies (``g_i`` is the number of source words read
before emitting target word ``i``).  File readers convert from 0-based on-disk
formats at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InvalidPolicy, LengthMismatch


def _check_word(word: str) -> None:
    if not word or any(ch.isspace() for ch in word):
        raise ValueError(f"invalid word {word!r}: must be non-empty without whitespace")


@dataclass(frozen=True)
class SentencePair:
    id: str
    source_words: tuple[str, ...]
    target_words: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "source_words", tuple(self.source_words))
        object.__setattr__(self, "target_words", tuple(self.target_words))
        if not self.source_words or not self.target_words:
            raise ValueError(f"sentence pair {self.id!r} needs at least one word per side")
        for w in self.source_words + self.target_words:
            _check_word(w)

    @property
    def J(self) -> int:
        return len(self.source_words)

    @property
    def I(self) -> int:  # noqa: E743
        return len(self.target_words)


@dataclass(frozen=True)
class Tokenization:
    """A token sequence plus its token -> word map.

    ``word_of_token[m]`` is the 1-based word index of token ``m`` (0-based
    position in the tuple); ``is_word_final[m]`` marks the last token of a word.
    """

    tokens: tuple[str, ...]
    word_of_token: tuple[int, ...]
    is_word_final: tuple[bool, ...]

    def __post_init__(self):
        for name in ("tokens", "word_of_token", "is_word_final"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        n = len(self.tokens)
        if n == 0:
            raise ValueError("tokenization must contain at least one token")
        if len(self.word_of_token) != n or len(self.is_word_final) != n:
            raise LengthMismatch("tokens, word_of_token and is_word_final differ in length")
        if self.word_of_token[0] != 1:
            raise ValueError("first token must belong to word 1")
        for a, b in zip(self.word_of_token, self.word_of_token[1:]):
            if b not in (a, a + 1):
                raise ValueError("word_of_token must be non-decreasing without gaps")
        for m in range(n):
            last_of_word = m == n - 1 or self.word_of_token[m + 1] != self.word_of_token[m]
            if self.is_word_final[m] != last_of_word:
                raise ValueError(f"is_word_final inconsistent at token {m + 1}")

    @property
    def token_count(self) -> int:
        return len(self.tokens)

    @property
    def word_count(self) -> int:
        return self.word_of_token[-1]

    def words(self) -> list[str]:
        out: list[str] = []
        for tok, w in zip(self.tokens, self.word_of_token):
            if w > len(out):
                out.append(tok)
            else:
                out[-1] += tok
        return out


def is_valid_schedule(seq: Sequence[int], upper: int) -> bool:
    """True iff every entry is in ``[1, upper]`` and the sequence never decreases."""
    prev = 1
    for v in seq:
        if not isinstance(v, int) or isinstance(v, bool) or v < prev or v > upper:
            return False
        prev = v
    return True


@dataclass(frozen=True)
class TokenPolicy:
    """``h[n-1]`` source tokens are available when generating target token ``n``."""

    h: tuple[int, ...]
    source_tokens: int

    def __post_init__(self):
        object.__setattr__(self, "h", tuple(self.h))
        if self.source_tokens < 1:
            raise InvalidPolicy("source token count must be >= 1")
        if not is_valid_schedule(self.h, self.source_tokens):
            raise InvalidPolicy(
                f"token policy {list(self.h)} is not non-decreasing within [1, {self.source_tokens}]"
            )

    def __len__(self) -> int:
        return len(self.h)


@dataclass(frozen=True)
class WordPolicy:
    """``g[i-1]`` source words are read before emitting target word ``i``.

    An empty ``g`` is allowed; it describes a session that emitted nothing.
    """

    g: tuple[int, ...]
    source_words: int

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        if self.source_words < 1:
            raise InvalidPolicy("source word count must be >= 1")
        if not is_valid_schedule(self.g, self.source_words):
            raise InvalidPolicy(
                f"word policy {list(self.g)} is not non-decreasing within [1, {self.source_words}]"
            )

    def __len__(self) -> int:
        return len(self.g)

    def __iter__(self):
        return iter(self.g)

    def __getitem__(self, i):
        return self.g[i]


@dataclass(frozen=True)
class BoundaryConfig:
    """Minimum (``B``) and maximum (``T``) source words before the first target word."""

    B: int = 1
    T: int = 1

    def __post_init__(self):
        if self.B < 1 or self.T < self.B:
            raise ValueError(f"boundary config needs 1 <= B <= T, got B={self.B}, T={self.T}")

    def lower(self, i: int, J: int) -> int:
        return min(i - 1 + self.B, J)

    def upper(self, i: int, J: int) -> int:
        return min(i - 1 + self.T, J)


@dataclass(frozen=True)
class AlignmentSet:
    """Set of 1-based ``(src_index, tgt_index)`` word alignment edges."""

    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        edges = frozenset((int(s), int(t)) for s, t in self.edges)
        for s, t in edges:
            if s < 1 or t < 1:
                raise ValueError(f"alignment indices are 1-based, got ({s}, {t})")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "AlignmentSet":
        pairs = list(pairs)
        if len(set(pairs)) != len(pairs):
            raise ValueError("duplicate alignment edges")
        return cls(frozenset(pairs))

    def check_bounds(self, J: int, I: int) -> None:  # noqa: E741
        for s, t in self.edges:
            if not (1 <= s <= J and 1 <= t <= I):
                raise IndexError(f"alignment edge ({s}, {t}) outside [1,{J}] x [1,{I}]")

    def aligned_targets(self) -> set[int]:
        return {t for _, t in self.edges}

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(sorted(self.edges))
