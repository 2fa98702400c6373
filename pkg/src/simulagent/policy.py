"""Construction, conversion, restriction and repair of read/write schedules."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import BoundaryConfig, TokenPolicy, Tokenization, WordPolicy
from .errors import InvalidK, LengthMismatch, TraceFormatError
from .tokenization import complete_words_in_prefix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolicyTrace:
    """Token-level schedule recorded offline for one sentence.

    ``h`` is kept raw: bounds depend on the source tokenization, which is only
    known at conversion time, so repair happens there.
    """

    sentence_id: str
    h: tuple[int, ...]


@dataclass(frozen=True)
class Repair:
    index: int  # 1-based
    kind: str  # "clamped_low" | "clamped_high" | "raised"
    before: int
    after: int


@dataclass
class RepairReport:
    repairs: list[Repair] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.repairs)

    def indices(self, kind: str | None = None) -> list[int]:
        return [r.index for r in self.repairs if kind is None or r.kind == kind]

    def to_json(self) -> list[dict]:
        return [r.__dict__.copy() for r in self.repairs]


def wait_k_token_policy(k: int, M: int, N: int) -> TokenPolicy:
    if k < 1:
        raise InvalidK(f"wait-k needs k >= 1, got {k}")
    if M < 1 or N < 1:
        raise ValueError("source and target lengths must be >= 1")
    return TokenPolicy(tuple(min(k + n - 1, M) for n in range(1, N + 1)), M)


def wait_k_word_policy(k: int, J: int, I: int) -> WordPolicy:  # noqa: E741
    """Word-level wait-k: ``g_i = min(k + i - 1, J)``."""
    if k < 1:
        raise InvalidK(f"wait-k needs k >= 1, got {k}")
    return WordPolicy(tuple(min(k + i - 1, J) for i in range(1, I + 1)), J)


def to_word_policy(
    h: TokenPolicy | Sequence[int],
    src_tok: Tokenization,
    tgt_tok: Tokenization,
    J: int,
) -> WordPolicy:
    """Lift a token-level schedule to whole words.

    For each target word, take the schedule entry at its last token, count the
    source words fully covered by that many source tokens (``u``), and read one
    more word: ``g_i = min(u + 1, J)``.  The ``+1`` applies even when the
    prefix ends exactly on a word boundary.
    """
    hs = h.h if isinstance(h, TokenPolicy) else tuple(h)
    if len(hs) != tgt_tok.token_count:
        raise LengthMismatch(
            f"policy has {len(hs)} entries but target has {tgt_tok.token_count} tokens"
        )
    if src_tok.word_count != J:
        raise LengthMismatch(f"source tokenization has {src_tok.word_count} words, J={J}")
    g = []
    for hn, final in zip(hs, tgt_tok.is_word_final):
        if final:
            u = complete_words_in_prefix(src_tok, hn)
            g.append(min(u + 1, J))
    return WordPolicy(tuple(g), J)


def apply_boundary_restrictions(
    g: WordPolicy | Sequence[int], cfg: BoundaryConfig, J: int
) -> WordPolicy:
    gs = g.g if isinstance(g, WordPolicy) else tuple(g)
    out = []
    for i, gi in enumerate(gs, start=1):
        r = min(max(gi, i - 1 + cfg.B), i - 1 + cfg.T)
        out.append(min(r, J))
    return WordPolicy(tuple(out), J)


def validate_and_repair(seq: Sequence[int], upper: int) -> tuple[list[int], RepairReport]:
    """Clamp into ``[1, upper]`` then enforce non-decreasing order by running max."""
    if not seq:
        raise ValueError("cannot repair an empty schedule")
    if upper < 1:
        raise ValueError("upper bound must be >= 1")
    report = RepairReport()
    out: list[int] = []
    running = 1
    for idx, v in enumerate(seq, start=1):
        x = v
        if x < 1:
            report.repairs.append(Repair(idx, "clamped_low", v, 1))
            x = 1
        elif x > upper:
            report.repairs.append(Repair(idx, "clamped_high", v, upper))
            x = upper
        if x < running:
            report.repairs.append(Repair(idx, "raised", x, running))
            x = running
        running = x
        out.append(x)
    if report:
        logger.warning("repaired %d schedule entries", len(report.repairs))
    return out, report


def load_policy_traces(path: str | Path) -> list[PolicyTrace]:
    """Read a JSON Lines trace file: ``{"id": str, "h": [int, ...]}`` per line."""
    traces = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceFormatError(f"invalid JSON: {e.msg}", str(path), lineno) from e
            if not isinstance(obj, dict) or "id" not in obj or "h" not in obj:
                raise TraceFormatError('expected an object with "id" and "h"', str(path), lineno)
            h = obj["h"]
            if (
                not isinstance(h, list)
                or not h
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in h)
            ):
                raise TraceFormatError('"h" must be a non-empty list of integers', str(path), lineno)
            traces.append(PolicyTrace(str(obj["id"]), tuple(h)))
    return traces


def write_word_policies(path: str | Path, items: Sequence[tuple[str, WordPolicy]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sid, g in items:
            f.write(json.dumps({"id": sid, "g": list(g.g)}) + "\n")
