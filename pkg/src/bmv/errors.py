"""Exception types shared across the package."""


class BMVError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(BMVError, ValueError):
    """An input lies outside the domain of the requested operation."""


class EigenError(BMVError, ArithmeticError):
    """Eigendecomposition failed or did not reconstruct its input."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class QuadratureError(BMVError, ArithmeticError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message, nodes=None, estimate=None):
        super().__init__(message)
        self.nodes = nodes
        self.estimate = estimate


class ConsistencyError(BMVError, AssertionError):
    """Two independent evaluation paths disagree.

    This signals a defect in the code, never a mathematical counterexample.
    """
