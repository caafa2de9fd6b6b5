"""Exception types. All derive from ValueError or RuntimeError."""


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class FormatError(ValueError):
    """Malformed or empty input data."""


class InputError(ValueError):
    """Input fails a validation predicate."""


class ConfigurationError(ValueError):
    """Inconsistent discretization settings."""


class CoefficientError(ArithmeticError):
    """Coefficient or path evaluation produced a non-finite value."""


class SchemeError(RuntimeError):
    """A discrete scheme broke one of its structural guarantees."""


class SolverError(RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = history
