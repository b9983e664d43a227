"""Exception hierarchy shared across the package.

Exit-code mapping for the CLI: InvalidInputError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class ScanmaskError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ScanmaskError):
    """Bad arguments or violated preconditions (config, shapes, budgets)."""


class DimensionError(InvalidInputError):
    """Array shapes or mask widths do not agree."""


class InfeasibleConfigError(InvalidInputError):
    """Optimization config cannot be satisfied (e.g. candidate pool too small)."""


class UndefinedMetricError(InvalidInputError):
    """Metric denominator is degenerate (zero reference energy)."""


class DataError(ScanmaskError):
    """On-disk artifacts are missing, truncated, or inconsistent."""


class NumericalError(ScanmaskError):
    """Non-finite values encountered inside an iterative solver."""
