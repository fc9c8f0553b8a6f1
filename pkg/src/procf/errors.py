"""Exception types shared across the pipeline."""


class ProcfError(Exception):
    """Base class for all engine errors."""


class LogFormatError(ProcfError):
    """Malformed event-log input; carries the offending line when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ProcfError):
    """Schema declaration or schema/value mismatch."""


class PrefixLengthError(ProcfError, ValueError):
    """Requested prefix length outside 0 < k < trace length."""


class ProcessSpecError(ProcfError):
    """Invalid synthetic process specification."""


class PredictorError(ProcfError):
    """Black-box predictor failed (process death, bad labels, timeout)."""


class ProtocolError(PredictorError):
    """External predictor violated the wire protocol."""
