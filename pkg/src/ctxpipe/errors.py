"""Error taxonomy shared by the library, CLI, and HTTP API.

Every error carries a stable machine-readable ``code`` so the CLI and the
API render identical diagnostics for the same underlying condition.
"""

from __future__ import annotations

from typing import Optional


class CtxpipeError(Exception):
    """Base class for all package errors."""

    def __init__(self, code: str, message: str, *, rule: Optional[int] = None) -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.rule = rule


class InputError(CtxpipeError):
    """Malformed operator input: bad identifiers, unparseable documents."""


class RuleViolation(CtxpipeError):
    """A pipeline discipline rule rejected the requested transition."""

    def __init__(self, rule: int, code: str, message: str) -> None:
        super().__init__(code, message, rule=rule)


class StateError(CtxpipeError):
    """The workspace or pipeline is not in a state that permits the request."""


class NotFoundError(CtxpipeError):
    """A referenced pipeline, package, template, or dataset does not exist."""


class BusyError(CtxpipeError):
    """Another process holds the lock needed for this mutation."""

    def __init__(self, message: str) -> None:
        super().__init__("PIPELINE_BUSY", message)


class UndefinedEstimateError(CtxpipeError):
    """An estimator's inputs fall outside its domain (e.g. zero recaptures)."""

    def __init__(self, message: str) -> None:
        super().__init__("UNDEFINED_ESTIMATE", message)
