"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class StylochronError(Exception):
    """Base class for all package errors."""


class ConfigError(StylochronError):
    """Invalid configuration: bad value, missing file, inconsistent sizes."""


class DataError(StylochronError):
    """Invalid input data: empty images, malformed files, bad grids."""


class ParseError(DataError):
    """Malformed text input; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateContourError(DataError):
    """Fragment too small to carry a contour (e.g. a single pixel)."""


class EmptyFeatureError(DataError):
    """No usable ink: zero fraglets or a blank image where features are required."""


class NumericError(StylochronError):
    """Numerical failure during fitting or prediction (singular/non-finite)."""
