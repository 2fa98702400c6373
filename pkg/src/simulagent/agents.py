"""Policy-decision and translation agents sharing a session memory.

A policy agent looks at the memory and answers READ or WRITE.  On WRITE the
translation agent produces exactly one target word, or ``None`` for
end-of-sequence.
"""

from __future__ import annotations

import enum
import logging
import re
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import requests

from .core import WordPolicy
from .errors import AgentUnavailable, InvalidK, TemplateError

logger = logging.getLogger(__name__)

DEFAULT_INSTRUCTION = "Translate the following sentence from {src_lang} to {tgt_lang}."
DEFAULT_TEMPLATE = "{instruction}\n{source}\n{target_prefix}"
PLACEHOLDERS = ("{instruction}", "{source}", "{target_prefix}")
_PLACEHOLDER_RE = re.compile("|".join(re.escape(p) for p in PLACEHOLDERS))


class Decision(enum.Enum):
    READ = "R"
    WRITE = "W"


READ = Decision.READ
WRITE = Decision.WRITE


@dataclass
class Memory:
    """Instruction, source words read so far and target words emitted so far.

    Both word lists only grow; use :meth:`read` and :meth:`write`.
    """

    instruction: str = ""
    source_words: list[str] = field(default_factory=list)
    target_words: list[str] = field(default_factory=list)

    def read(self, word: str) -> None:
        self.source_words.append(word)

    def write(self, word: str) -> None:
        self.target_words.append(word)

    @property
    def words_read(self) -> int:
        return len(self.source_words)

    @property
    def words_written(self) -> int:
        return len(self.target_words)


@dataclass(frozen=True)
class PromptTemplate:
    text: str = DEFAULT_TEMPLATE

    def __post_init__(self):
        for ph in PLACEHOLDERS:
            n = self.text.count(ph)
            if n != 1:
                raise TemplateError(f"template must contain {ph} exactly once (found {n})")

    @classmethod
    def from_file(cls, path) -> "PromptTemplate":
        with open(path, encoding="utf-8") as f:
            return cls(f.read())


def render_prompt(template: PromptTemplate, memory: Memory) -> str:
    values = {
        "{instruction}": memory.instruction,
        "{source}": " ".join(memory.source_words),
        "{target_prefix}": " ".join(memory.target_words),
    }
    # Single pass, so substituted text is never re-expanded.
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(0)], template.text)


def format_instruction(instruction: str, src_lang: str = "German", tgt_lang: str = "English") -> str:
    return instruction.replace("{src_lang}", src_lang).replace("{tgt_lang}", tgt_lang)


class PolicyDecisionAgent(Protocol):
    def decide(self, memory: Memory, source_exhausted: bool) -> Decision: ...


class TranslationAgent(Protocol):
    def next_word(self, memory: Memory) -> str | None: ...


class WaitKWordAgent:
    """Read ``k`` words, then alternate one write and one read."""

    def __init__(self, k: int):
        if k < 1:
            raise InvalidK(f"wait-k needs k >= 1, got {k}")
        self.k = k

    def decide(self, memory: Memory, source_exhausted: bool) -> Decision:
        if source_exhausted or memory.words_read - memory.words_written >= self.k:
            return WRITE
        return READ

    def __repr__(self):
        return f"WaitKWordAgent(k={self.k})"


class ScheduledPolicyAgent:
    """Follow a precomputed word-level schedule ``g``.

    Past the end of the schedule the agent keeps writing, so the translation
    agent decides when to stop.
    """

    def __init__(self, g: WordPolicy | Sequence[int]):
        self.g = tuple(g.g if isinstance(g, WordPolicy) else g)

    def decide(self, memory: Memory, source_exhausted: bool) -> Decision:
        if source_exhausted:
            return WRITE
        i = memory.words_written
        if i >= len(self.g):
            return WRITE
        return WRITE if memory.words_read >= self.g[i] else READ

    def __repr__(self):
        return f"ScheduledPolicyAgent(g={list(self.g)})"


class OracleAgent:
    """Emit the reference translation word by word, then EOS."""

    def __init__(self, reference: Sequence[str]):
        self.reference = tuple(reference)

    def next_word(self, memory: Memory) -> str | None:
        i = memory.words_written
        return self.reference[i] if i < len(self.reference) else None


class EchoAgent:
    """Copy the next source word not yet echoed; EOS once all read words are echoed."""

    def next_word(self, memory: Memory) -> str | None:
        i = memory.words_written
        return memory.source_words[i] if i < memory.words_read else None


class RemoteAgent:
    """Translation agent backed by an HTTP text-generation endpoint.

    Request body: ``{"prompt", "max_new_tokens", "greedy": true, "stop": [" "]}``;
    the reply must be ``{"text": str}``.  The first whitespace-separated item
    of the reply is the next word; an empty reply, or one starting with the
    EOS sentinel, ends the sentence.
    """

    def __init__(
        self,
        endpoint: str,
        template: PromptTemplate | None = None,
        *,
        max_new_tokens: int = 16,
        timeout: float = 30.0,
        retries: int = 0,
        backoff: float = 0.5,
        eos_token: str = "</s>",
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.template = template or PromptTemplate()
        self.max_new_tokens = max_new_tokens
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.eos_token = eos_token
        self._session = session or requests.Session()

    def payload(self, memory: Memory) -> dict:
        return {
            "prompt": render_prompt(self.template, memory),
            "max_new_tokens": self.max_new_tokens,
            "greedy": True,
            "stop": [" "],
        }

    def _post(self, payload: dict) -> str:
        attempts = 0
        while True:
            attempts += 1
            try:
                resp = self._session.post(self.endpoint, json=payload, timeout=self.timeout)
            except requests.RequestException as e:
                err = AgentUnavailable(
                    f"request to {self.endpoint} failed: {e}", attempts=attempts, retryable=True
                )
            else:
                if 200 <= resp.status_code < 300:
                    try:
                        body = resp.json()
                    except ValueError:
                        body = None
                    if isinstance(body, dict) and isinstance(body.get("text"), str):
                        return body["text"]
                    raise AgentUnavailable(
                        f"malformed response from {self.endpoint}",
                        attempts=attempts,
                        status=resp.status_code,
                    )
                err = AgentUnavailable(
                    f"{self.endpoint} returned HTTP {resp.status_code}",
                    attempts=attempts,
                    retryable=resp.status_code >= 500,
                    status=resp.status_code,
                )
            if not err.retryable or attempts > self.retries:
                raise err
            logger.info("retrying %s after attempt %d", self.endpoint, attempts)
            time.sleep(self.backoff * attempts)

    def extract_word(self, text: str) -> str | None:
        text = text.strip()
        if not text or text.startswith(self.eos_token):
            return None
        word = text.split()[0]
        # A sentinel glued to the word ("Haus</s>") still ends after this word.
        if self.eos_token and self.eos_token in word:
            word = word.split(self.eos_token, 1)[0]
        return word or None

    def next_word(self, memory: Memory) -> str | None:
        return self.extract_word(self._post(self.payload(memory)))

    def close(self) -> None:
        self._session.close()
