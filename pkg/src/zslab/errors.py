"""Exception hierarchy shared by all zslab modules.

The split mirrors the error categories the command line reports:
parse errors (malformed files), precondition violations (a caller
broke a documented contract), budget exhaustion is *not* an error
(searches return partial results), and internal-consistency errors
(a mathematical invariant the code relies on failed, i.e. a bug).
"""

from __future__ import annotations


class ZslabError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ZslabError):
    """Malformed argument: wrong size, wrong group, value out of range."""


class DomainError(ZslabError):
    """Operation applied outside its mathematical domain (e.g. norm with d != 1)."""


class PreconditionError(ZslabError):
    """A documented precondition of an operation does not hold."""


class ParseError(InputError):
    """A text input (sequence file, checkpoint) failed to parse."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CheckpointError(ParseError):
    """A checkpoint file is malformed or inconsistent with the request."""


class ConstructionError(ZslabError):
    """An extremal construction could not be completed and verified."""


class InternalConsistencyError(ZslabError):
    """An invariant guaranteed by theory failed; indicates a bug."""
