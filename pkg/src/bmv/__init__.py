"""Numerical and exact checks of trace inequalities around the BMV conjecture."""

from bmv.errors import BMVError, ConsistencyError, DomainError, EigenError, QuadratureError

__version__ = "0.1.0"

__all__ = ["BMVError", "ConsistencyError", "DomainError", "EigenError", "QuadratureError"]
