"""The read/write session loop tying a policy agent to a translation agent."""

from __future__ import annotations

import json
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from .agents import READ, WRITE, Memory, PolicyDecisionAgent, TranslationAgent
from .core import BoundaryConfig, WordPolicy
from .errors import AgentUnavailable, Undefined

logger = logging.getLogger(__name__)


class EmptyPolicyWarning(UserWarning):
    """A transcript contained no WRITE events, so its policy is empty."""


@dataclass(frozen=True)
class SessionLimits:
    """Live constraints on a session.

    ``boundary`` clamps the realized schedule into
    ``[min(i-1+B, J), min(i-1+T, J)]``; ``None`` leaves decisions untouched.
    ``max_target_words`` defaults to ``2 * J + 10``.  A translation agent
    returning ``eos_word`` is treated like one returning ``None``.
    """

    boundary: BoundaryConfig | None = None
    max_target_words: int | None = None
    eos_word: str | None = "</s>"

    def __post_init__(self):
        if self.max_target_words is not None and self.max_target_words < 1:
            raise ValueError("max_target_words must be >= 1")

    def cap(self, J: int) -> int:
        return self.max_target_words if self.max_target_words is not None else 2 * J + 10


@dataclass(frozen=True)
class Event:
    kind: str  # "R", "W" or "EOS"
    word: str | None
    t: float

    def to_json(self) -> list:
        return ["EOS"] if self.kind == "EOS" else [self.kind, self.word]


@dataclass
class Transcript:
    id: str = ""
    events: list[Event] = field(default_factory=list)
    seconds: float = 0.0
    truncated: bool = False
    source_len: int = 0

    @property
    def g(self) -> tuple[int, ...]:
        return derive_g(self.events)

    @property
    def target_words(self) -> list[str]:
        return [e.word for e in self.events if e.kind == "W"]

    @property
    def source_words(self) -> list[str]:
        return [e.word for e in self.events if e.kind == "R"]

    @property
    def write_count(self) -> int:
        return sum(1 for e in self.events if e.kind == "W")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "events": [e.to_json() for e in self.events],
            "g": list(self.g),
            "seconds": self.seconds,
            "truncated": self.truncated,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Transcript":
        events = []
        for ev in obj["events"]:
            if ev[0] == "EOS":
                events.append(Event("EOS", None, 0.0))
            else:
                events.append(Event(ev[0], ev[1], 0.0))
        t = cls(str(obj["id"]), events, float(obj.get("seconds", 0.0)), bool(obj.get("truncated", False)))
        t.source_len = len(t.source_words)
        return t


def derive_g(events: Iterable[Event]) -> tuple[int, ...]:
    reads, g = 0, []
    for e in events:
        if e.kind == "R":
            reads += 1
        elif e.kind == "W":
            g.append(reads)
    return tuple(g)


class _Source:
    def __init__(self, words: Iterable[str]):
        self._it: Iterator[str] = iter(words)
        self.exhausted = False
        self.wait = 0.0

    def pull(self) -> str | None:
        if self.exhausted:
            return None
        t0 = time.monotonic()
        try:
            return next(self._it)
        except StopIteration:
            self.exhausted = True
            return None
        finally:
            self.wait += time.monotonic() - t0


def run_session(
    source: Iterable[str],
    pa: PolicyDecisionAgent,
    ta: TranslationAgent,
    limits: SessionLimits | None = None,
    *,
    sentence_id: str = "",
    instruction: str = "",
    source_len: int | None = None,
) -> Transcript:
    """Run one simultaneous translation session.

    The boundary filter runs before every decision is executed: a WRITE of
    word ``i`` turns into READ while fewer than ``i-1+B`` words are read, and a
    READ turns into WRITE once ``i-1+T`` words are read or the source has
    ended.  ``J`` never needs to be known up front since an exhausted stream
    realizes the ``min(., J)`` clamp by itself.
    """
    limits = limits or SessionLimits()
    if source_len is None and hasattr(source, "__len__"):
        source_len = len(source)
    if source_len == 0:
        raise ValueError("source must contain at least one word")
    src = _Source(source)
    memory = Memory(instruction=instruction)
    transcript = Transcript(id=sentence_id)
    bound = limits.boundary
    t_start = time.monotonic()

    def stamp() -> float:
        return time.monotonic() - t_start - src.wait

    try:
        while True:
            J_est = source_len if source_len is not None else memory.words_read
            if memory.words_written >= limits.cap(J_est):
                transcript.truncated = True
                break
            decision = pa.decide(memory, src.exhausted)
            i = memory.words_written + 1
            if not src.exhausted and bound is not None:
                if decision is WRITE and memory.words_read < i - 1 + bound.B:
                    decision = READ
                elif decision is READ and memory.words_read >= i - 1 + bound.T:
                    decision = WRITE
            if decision is READ:
                word = src.pull()
                if word is not None:
                    memory.read(word)
                    transcript.events.append(Event("R", word, stamp()))
                    continue
                decision = WRITE
            word = ta.next_word(memory)
            if word is None or word == limits.eos_word:
                transcript.events.append(Event("EOS", None, stamp()))
                break
            memory.write(word)
            transcript.events.append(Event("W", word, stamp()))
    except AgentUnavailable as e:
        transcript.seconds = stamp()
        transcript.source_len = source_len if source_len is not None else memory.words_read
        e.transcript = transcript
        raise
    if memory.words_read == 0 and src.exhausted:
        raise ValueError("source stream yielded no words")
    transcript.seconds = stamp()
    transcript.source_len = source_len if source_len is not None else memory.words_read
    return transcript


def replay_policy(transcript: Transcript) -> WordPolicy:
    """``g_i`` = number of READ events before the ``i``-th WRITE."""
    g = transcript.g
    if not g:
        warnings.warn(f"transcript {transcript.id!r} has no WRITE events", EmptyPolicyWarning)
    J = max(transcript.source_len, len(transcript.source_words), 1)
    return WordPolicy(g, J)


@dataclass(frozen=True)
class SpeedMeasurement:
    words_per_second: float
    words: int
    seconds: float
    reliable: bool = True


def measure_speed(transcripts: Sequence[Transcript]) -> SpeedMeasurement:
    """Pooled generation speed: total WRITE count over total wall time."""
    words = sum(t.write_count for t in transcripts)
    seconds = sum(t.seconds for t in transcripts)
    if words == 0:
        raise Undefined("speed is undefined without any generated words")
    if seconds <= 0:
        return SpeedMeasurement(math.inf, words, seconds, reliable=False)
    return SpeedMeasurement(words / seconds, words, seconds)


@dataclass
class CorpusRun:
    transcripts: list[Transcript]
    error: AgentUnavailable | None = None


def run_corpus(
    items: Sequence[tuple[str, Sequence[str]]],
    make_agents: Callable[[int], tuple[PolicyDecisionAgent, TranslationAgent]],
    limits: SessionLimits | None = None,
    *,
    jobs: int = 1,
    instruction: str = "",
) -> CorpusRun:
    """Run one session per ``(id, source_words)`` item, ``jobs`` at a time.

    ``make_agents(index)`` builds fresh agents per session.  Transcripts come
    back in input order whatever the completion order.  On the first
    ``AgentUnavailable`` the remaining sessions still finish and the error is
    returned with whatever completed, including the failing partial transcript.
    """

    def one(idx: int):
        sid, words = items[idx]
        pa, ta = make_agents(idx)
        try:
            return run_session(
                list(words), pa, ta, limits, sentence_id=sid, instruction=instruction
            ), None
        except AgentUnavailable as e:
            return e.transcript, e

    if jobs <= 1:
        results = [one(i) for i in range(len(items))]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(len(items))))
    errors = [e for _, e in results if e is not None]
    return CorpusRun([t for t, _ in results if t is not None], errors[0] if errors else None)


def write_transcripts(path: str | Path, transcripts: Iterable[Transcript]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in transcripts:
            f.write(json.dumps(t.to_json(), ensure_ascii=False) + "\n")


def load_transcripts(path: str | Path) -> list[Transcript]:
    with open(path, encoding="utf-8") as f:
        return [Transcript.from_json(json.loads(line)) for line in f if line.strip()]
