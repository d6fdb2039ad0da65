"""Exception hierarchy. Everything raised on purpose derives from ExportError."""

from __future__ import annotations


class ExportError(Exception):
    """Base class for all errors this package raises deliberately."""


class ConfigError(ExportError):
    """A job or parameter value is out of range or malformed."""


class FormatError(ExportError):
    """An input file or manifest does not parse or violates its contract."""


class IoError(ExportError):
    """The filesystem refused a read or write."""


class ModelUnavailable(ExportError):
    """The encoder backend could not be imported or the model could not load."""


class MissingCredential(ExportError):
    """The API credential environment variable is unset or empty."""


class ApiError(ExportError):
    """A chat API call failed.

    retryable marks transient failures (rate limits, server errors, dropped
    connections) that a backoff loop may try again; everything else should
    surface immediately.
    """

    def __init__(self, message: str, *, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class GenerationError(ExportError):
    """A generation run stopped early. The output file keeps partial progress."""
