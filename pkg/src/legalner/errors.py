"""Exception types shared across the toolkit."""

from __future__ import annotations


class LegalNerError(Exception):
    """Base class for all toolkit errors."""


class ParseError(LegalNerError):
    """Raised when an input file is syntactically malformed.

    ``line`` and ``column`` are 1-based positions into the raw input when
    the underlying parser provides them, otherwise ``None``.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message)
        self.line = line
        self.column = column


class ValidationError(LegalNerError):
    """Raised when well-formed input violates a corpus invariant."""


class CodecError(LegalNerError):
    """Raised on ill-formed tag sequences or span/token misalignment."""


class AlignmentError(CodecError):
    """Raised when a span boundary does not coincide with a token boundary."""


class AdapterError(LegalNerError):
    """Raised when an external tagger process misbehaves (timeout, bad protocol)."""


class ModelIOError(LegalNerError):
    """Raised on corrupt or incompatible model files."""
