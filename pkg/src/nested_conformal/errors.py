"""Exception hierarchy shared across the package."""


class NestedConformalError(Exception):
    """Base class for all package errors."""


class InvalidInputError(NestedConformalError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(NestedConformalError):
    """An experiment or estimator configuration is invalid."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = list(violations or [])


class ConfigParseError(ConfigError):
    """A configuration file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class DataIntegrityError(NestedConformalError):
    """Input data is malformed, e.g. a month is missing from a monthly series."""


class UnsupportedMetricError(NestedConformalError):
    """A metric was requested that the available records cannot support."""
