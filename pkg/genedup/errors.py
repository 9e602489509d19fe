"""Exception hierarchy shared by the genedup modules."""

from typing import Optional


class GenedupError(Exception):
    """Base class for all errors raised by genedup."""


class ParameterError(GenedupError, ValueError):
    """A model precondition was violated."""


class DomainError(ParameterError):
    """The requested point lies outside the curve's parameter range."""


class SingularProjectionError(GenedupError, ArithmeticError):
    """A projection map or one of its derivatives is undefined at the input."""


class QuadratureError(GenedupError, ArithmeticError):
    """Numerical integration failed.

    Attributes:
        location: Coordinate at which the integrand misbehaved, if known.
    """

    def __init__(self, message: str, location: Optional[float] = None):
        if location is not None:
            message = f"{message} (at z={location:.9g})"
        super().__init__(message)
        self.location = location


class SimulationInstabilityError(GenedupError, ArithmeticError):
    """A simulated path produced NaN or left the admissible set."""

    def __init__(self, message: str, path: Optional[int] = None, step: Optional[int] = None):
        where = []
        if path is not None:
            where.append(f"path={path}")
        if step is not None:
            where.append(f"step={step}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.path = path
        self.step = step


class ConfigError(GenedupError, ValueError):
    """An experiment configuration failed validation.

    Attributes:
        fields: Names of the offending configuration fields.
    """

    def __init__(self, message: str, fields: Optional[list] = None):
        super().__init__(message)
        self.fields = list(fields or [])
