class CvteleError(Exception):
    """Base class for all package errors."""


class InvalidParameter(CvteleError, ValueError):
    """A physical or numerical argument is out of its allowed range."""


class CorruptState(CvteleError, ValueError):
    """A covariance matrix no longer describes a measurable state."""


class ConfigError(CvteleError):
    """An experiment config file could not be parsed or validated.

    Args:
        message: Human readable description.
        line: 1-based line number in the config file, when known.
    """

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
