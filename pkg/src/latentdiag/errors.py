"""Exception classes shared across the toolkit."""


class LatentDiagError(Exception):
    """Base class for every error raised by latentdiag."""


class DataError(LatentDiagError, ValueError):
    """Input files or arrays fail validation (shape, parse, finiteness)."""


class NumericError(LatentDiagError, ArithmeticError):
    """A computation cannot produce a meaningful number (singular system, NaN loss)."""
