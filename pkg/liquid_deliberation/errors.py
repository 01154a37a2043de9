"""
Exceptions raised by the deliberation library.
"""

from typing import Any, List


class DeliberationError(Exception):
    """Base class for every error raised by liquid_deliberation."""


class ProtocolPhaseError(DeliberationError):
    """An operation was attempted in the wrong phase of the protocol."""


class DomainError(DeliberationError, ValueError):
    """An argument lies outside the domain of the operation."""


class UnauthorizedError(DeliberationError):
    """An agent acted on something it has no right to act on."""


class NoOpReclaimError(DeliberationError):
    """A reclaim was requested by the unit's current holder."""


class RetiredUnitError(DeliberationError):
    """A unit retired by the power floor was asked to move."""


class EmptySocietyError(DeliberationError):
    """No agent holds positive voting power."""


class LineageError(DeliberationError):
    """A build-upon link points nowhere, loops, or crosses iterations."""


class UnresolvedConflictError(DeliberationError):
    """Conflicting corrections reached proposal assembly."""


class UndefinedMetricError(DeliberationError):
    """A metric was requested on input where it has no value."""


class TraceParseError(DeliberationError):
    """A persisted trace is truncated or malformed."""


class SafetyCapError(DeliberationError):
    """A run hit max_iterations before any stopping rule fired.

    `partial` holds the run result up to the cap, trace included.
    """

    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)


class ConfigError(DeliberationError):
    """A scenario configuration failed validation.

    All problems are collected before raising so a user sees every
    offending field at once.
    """

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        super().__init__("invalid scenario configuration:\n  - " + "\n  - ".join(self.problems))
