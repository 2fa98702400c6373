"""Exception hierarchy shared by every module."""

from __future__ import annotations


class SimulError(Exception):
    """Base class for all errors raised by this package."""


class EmptySentence(SimulError, ValueError):
    pass


class MapMismatch(SimulError, ValueError):
    pass


class IndexOutOfRange(SimulError, IndexError):
    pass


class InvalidK(SimulError, ValueError):
    pass


class LengthMismatch(SimulError, ValueError):
    pass


class InvalidPolicy(SimulError, ValueError):
    pass


class TraceFormatError(SimulError, ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class TemplateError(SimulError, ValueError):
    pass


class AgentUnavailable(SimulError):
    """A remote translation agent could not produce a word.

    ``attempts`` is how many requests were made, ``retryable`` whether a later
    retry has a chance of succeeding (timeouts, 5xx, connection errors).
    The orchestrator attaches the partial ``transcript`` before re-raising.
    """

    def __init__(
        self,
        message: str,
        *,
        attempts: int = 1,
        retryable: bool = False,
        status: int | None = None,
    ):
        super().__init__(message)
        self.attempts = attempts
        self.retryable = retryable
        self.status = status
        self.transcript = None


class Undefined(SimulError, ValueError):
    """A metric is undefined for the given input (e.g. zero-length target)."""


class TooFewSentences(SimulError, ValueError):
    pass


class SampleTooLarge(SimulError, ValueError):
    pass


class AlignmentFormatError(SimulError, ValueError):
    pass
