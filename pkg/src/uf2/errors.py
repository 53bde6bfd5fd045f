"""Exception hierarchy. The CLI maps these onto exit codes."""


class UF2Error(Exception):
    """Base class for all package errors."""


class ShapeError(UF2Error, ValueError):
    pass


class ConfigError(UF2Error, ValueError):
    pass


class NumericError(UF2Error, ArithmeticError):
    pass


class DataError(UF2Error, ValueError):
    """Malformed benchmark-merge inputs (unknown labels, bad CSV rows)."""
