"""Exception hierarchy shared across gazewalk.

The CLI maps ``InputError`` (and subclasses) to exit code 2 and
``ConfigError`` to exit code 3.
"""


class GazewalkError(Exception):
    pass


class InputError(GazewalkError):
    """Bad or missing input data."""


class DataError(InputError):
    """Input data violates a structural rule (sizes, ranges, sampling)."""


class FormatError(InputError):
    """A file does not follow its declared text format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(DataError):
    pass


class ParameterError(GazewalkError, ValueError):
    pass


class EstimationError(GazewalkError, ValueError):
    """Not enough (or degenerate) data to estimate a model."""


class ModelStateError(GazewalkError):
    """Model used before it was fitted or specified."""


class DegenerateMapError(GazewalkError, ValueError):
    pass


class ConfigError(GazewalkError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class StreamEnd(GazewalkError):
    """Raised by a frame source when no frame exists for the requested tick."""


class SupportError(ParameterError):
    """Second distribution has zero mass where the first does not."""
