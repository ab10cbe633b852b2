"""Exception taxonomy shared by every module."""


class VtgError(Exception):
    """Base class for all package errors."""


class ShapeError(VtgError, ValueError):
    """Operand dimensions are incompatible."""


class ContractError(VtgError, ValueError):
    """A documented precondition was violated."""


class ConfigurationError(VtgError, ValueError):
    """A configuration value leads to an empty or impossible setup."""


class DataError(VtgError):
    """A data file is missing, malformed, or references unknown ids."""


class NumericError(VtgError):
    """A non-finite value appeared where the pipeline requires finite ones."""
