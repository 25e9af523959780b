"""Exception hierarchy shared by every hslab module."""


class HslabError(Exception):
    """Base class for all library errors."""


class DomainError(HslabError, ValueError):
    """Parameters outside the admissible range."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ConvergenceError(HslabError, ArithmeticError):
    """A quadrature failed to reach its tolerance."""


class SingularityError(HslabError, ArithmeticError):
    """An integrand is not integrable at a declared endpoint."""


class NonConvergence(HslabError):
    """The distance optimizer ran out of budget.

    The best point seen so far is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateDecomposition(HslabError):
    """The function lies (numerically) on the extremal manifold."""


class GridError(HslabError, ValueError):
    """Malformed grid specification for the spectral solver."""


class EigenFailure(HslabError):
    """Inverse iteration stagnated."""


class RegimeError(HslabError, ValueError):
    """A construction was requested outside the exponent range it is built for."""
