"""Exception hierarchy.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class StkdeError(Exception):
    """Base class for all package errors."""


class ConfigError(StkdeError):
    """Invalid configuration or usage."""


class DataError(StkdeError):
    """Problem with input data or serialized artifacts."""


class NoDataError(DataError):
    """An operation found no usable events."""


class FormatError(DataError):
    """Malformed input file (bad header, unparseable structure)."""


class OutOfDomainError(DataError):
    """A point lies outside the study region's bounding box."""


class LagRangeError(DataError):
    """Requested lag falls outside the model's (0, L] window."""


class ModelFileError(DataError):
    """Model file failed version or checksum validation."""


class EmptyTestError(DataError):
    """A backtest's test range contains no events to score."""


class NumericalError(StkdeError):
    """Numerical failure during estimation."""


class DegenerateSeriesError(NumericalError):
    """A share series has zero variance; its autocorrelation is undefined."""


class BandwidthError(NumericalError):
    """Point scatter is degenerate; no bandwidth can be selected."""


class FitFailedError(NumericalError):
    """Weight-parameter optimization failed on every start."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
