"""Shared exception hierarchy.

RetyperError and its subclasses signal problems with user inputs (bad files,
schema violations, wiring mistakes); the CLI maps them to exit code 1.
Anything else escaping to the CLI is an internal error (exit code 2).
"""

from __future__ import annotations


class RetyperError(Exception):
    """Base class for input/validation failures."""


class EmptyCorpusError(RetyperError):
    """An operation that requires a non-empty corpus received none."""


class ParseError(RetyperError):
    """Syntactically invalid input; carries a byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(RetyperError):
    """Schema-level violation: a well-formed record with bad content."""


class NoDebugInfoError(RetyperError):
    """Binary has no DWARF debug sections."""


class DwarfParseError(ParseError):
    """Malformed DWARF data; offset is relative to the named section."""


class WiringError(RetyperError):
    """Pipeline stages were combined with mismatched inputs (a bug upstream)."""


class AmbiguousAlignmentError(RetyperError):
    """Duplicate storage keys prevent a unique stripped/debug variable match."""


class CoverageError(RetyperError):
    """Predictions do not cover the evaluation set one-to-one."""


class DivergenceError(RetyperError):
    """Training produced a non-finite loss."""
