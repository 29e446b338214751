"""Exception hierarchy.

Validation problems derive from :class:`ValueError` so callers using plain
``except ValueError`` keep working; numerical failures derive from
:class:`NumericalError` and map to exit code 2 in the CLI.
"""


class KrlabError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(KrlabError, ValueError):
    pass


class DimensionError(KrlabError, ValueError):
    pass


class ResolutionError(KrlabError, ValueError):
    pass


class MassMismatchError(KrlabError, ValueError):
    pass


class SizeError(KrlabError, ValueError):
    pass


class DomainError(KrlabError, ValueError):
    pass


class ConfigError(KrlabError, ValueError):
    pass


class NumericalError(KrlabError, RuntimeError):
    pass


class StabilityError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
