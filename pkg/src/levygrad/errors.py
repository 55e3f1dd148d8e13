"""Exception hierarchy shared by all modules."""


class LevyGradError(Exception):
    """Base class for library errors."""


class DomainError(LevyGradError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(LevyGradError, ValueError):
    """A model or experiment configuration is invalid."""


class UnsupportedError(LevyGradError, NotImplementedError):
    """The requested combination is not supported (e.g. no exact sampler)."""


class UndefinedPointError(DomainError):
    """A quantity is undefined at the requested point (e.g. log of a zero density)."""


class NumericalError(LevyGradError, ArithmeticError):
    """A numerical routine failed; ``diagnostics`` carries the details."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class AccuracyError(NumericalError):
    """A discretisation cannot reach the requested accuracy."""


class GridError(NumericalError):
    """A spatial grid is too narrow for the mass it must carry."""
