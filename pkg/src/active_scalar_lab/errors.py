"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class RangeError(ValueError):
    """A requested value lies outside the range of a function."""


class PreconditionError(ValueError):
    """An input violates a structural precondition (e.g. concavity)."""


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class DivergenceError(ArithmeticError):
    """An integral or a run diverged."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class CflError(RuntimeError):
    """A time step violates the CFL restriction."""

    def __init__(self, message, suggested_dt):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class ShockInStepError(RuntimeError):
    """Characteristics cross within one splitting step."""


class RecursionBreakdown(RuntimeError):
    """The barrier recursion left its domain (kappa * h >= 1)."""


class ConstructionError(ValueError):
    """An object could not be built with the requested parameters."""


class ConfigError(ValueError):
    """Malformed configuration text."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
