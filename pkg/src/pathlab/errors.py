"""Exception types shared across the package.

The CLI maps these onto exit codes: validation failures exit 1,
numeric failures exit 2.
"""


class ValidationError(ValueError):
    """Raised when inputs, configuration, or preconditions are invalid."""


class NumericFailureError(ArithmeticError):
    """Raised when a propagation or solve produces non-finite amplitudes."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration budget.

    The best iterate found so far is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
