"""Exception hierarchy shared by all solver modules."""


class SplittingError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SplittingError, ValueError):
    """Arguments violate a documented precondition."""


class StepsizeError(InvalidInputError):
    """A stepsize or relaxation parameter lies outside its admissible range."""


class NumericalError(SplittingError, ArithmeticError):
    """A numerical routine failed; ``residual`` carries the last measured error."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DivergenceError(NumericalError):
    """An iteration produced non-finite values or was flagged as diverging."""


class LineSearchError(NumericalError):
    """Backtracking reached its floor without satisfying the descent test."""
