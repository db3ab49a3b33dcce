"""Exception hierarchy shared across the package."""


class BeatnoteError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(BeatnoteError, ValueError):
    """A physical or configuration parameter is out of its valid range."""


class ResolutionError(BeatnoteError):
    """A grid or sampling configuration is too coarse/short for the request."""


class DomainError(BeatnoteError):
    """Inputs are structurally valid but outside the operation's domain."""


class GridMismatchError(DomainError):
    """Two traces that must share a frequency grid do not."""


class WidthUndefinedError(BeatnoteError):
    """A requested level is not crossed on both sides of the peak."""


class AmbiguousPeakError(BeatnoteError):
    """The trace has multiple global maxima of equal height."""


class ExtremumNotFoundError(BeatnoteError):
    """No coherence-envelope extremum near its predicted position."""


class NoSolutionError(BeatnoteError):
    """A measured contrast lies outside the attainable range of the model."""


class InitializationError(BeatnoteError):
    """A fit could not be started from the given data/initial values."""


class InsufficientDataError(BeatnoteError):
    """Too little data to constrain the requested fit."""


class TraceIOError(BeatnoteError):
    """Filesystem problem while reading or writing a trace/report."""


class ParseError(BeatnoteError):
    """Malformed content in a trace file."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SchemaError(BeatnoteError):
    """Structurally parseable file violating the trace schema."""
