"""Exception types shared across the package."""


class EvaluationError(ArithmeticError):
    """A special-function series failed to converge within its term cap."""

    def __init__(self, message, a=None, b=None, c=None, x=None):
        super().__init__(message)
        self.a, self.b, self.c, self.x = a, b, c, x


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    ``interval`` is the (lo, hi) cell with the largest error estimate.
    """

    def __init__(self, message, interval=None, error=None):
        super().__init__(message)
        self.interval = interval
        self.error = error


class NotPositiveDefiniteError(ArithmeticError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class HorizonError(ValueError):
    """The path ensemble does not reach far enough in time."""


class GridMismatchError(ValueError):
    pass
