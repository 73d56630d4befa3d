"""Exception taxonomy shared across the package.

CLI exit-code mapping: UsageError/ConfigError -> 1, DataError -> 2,
NumericalFault -> 3.
"""


class AlphagraphError(Exception):
    """Base class for all package errors."""


class UsageError(AlphagraphError):
    """Bad command-line invocation."""


class ConfigError(AlphagraphError):
    """Invalid configuration value or inconsistent hyper-parameters."""


class DataError(AlphagraphError):
    """Malformed, inconsistent, or empty input data."""


class ShapeError(AlphagraphError):
    """Dimension mismatch between arrays or model components."""


class NumericalFault(AlphagraphError):
    """NaN/Inf produced during computation, or a failed numerical solve."""
