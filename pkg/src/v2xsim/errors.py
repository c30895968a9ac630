"""Exception hierarchy shared across the package.

ConfigError maps to CLI exit code 2, DataError to exit code 3.
"""


class V2xSimError(Exception):
    """Base class for all package errors."""


class ConfigError(V2xSimError):
    """Invalid or inconsistent configuration (bad parameter, missing file path)."""


class DataError(V2xSimError):
    """Malformed or out-of-range input data (curve files, model files)."""


class CurveRangeError(DataError):
    """A requested PER level lies outside the range spanned by a curve."""
