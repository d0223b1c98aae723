"""
Exceptions raised by lqgraph.
"""

__all__ = [
    "LQGraphError", "DimensionError", "LawViolationError", "NonConvergenceError", "InstabilityError",
    "DescriptionParseError"
]


class LQGraphError(Exception):
    """
    Base class for all lqgraph errors.
    """


class DimensionError(LQGraphError, ValueError):
    """
    Raised when block partitions or matrix shapes do not line up.
    """


class LawViolationError(LQGraphError, ValueError):
    """
    Raised when a series carries nonzero coefficients on blocks its sparsity law forbids.
    """


class NonConvergenceError(LQGraphError, RuntimeError):
    """
    Raised when an iteration that must converge did not, or produced non-finite values.
    """


class InstabilityError(LQGraphError, RuntimeError):
    """
    Raised when a realization that must be stable has spectral radius of at least one.
    """


class DescriptionParseError(LQGraphError, ValueError):
    """
    Raised when a system-description file cannot be parsed.

    Carries the line and column of the failure when the underlying parser reports them.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = "{} (line {}, column {})".format(message, line, column)
        super().__init__(message)
