"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigurationError(ValueError):
    """An experiment or trial configuration is invalid.

    ``path`` names the offending field, e.g. ``"snr.step"``.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalError(ArithmeticError):
    """A quadrature or series evaluation produced a non-finite result."""


class NumericalWarning(RuntimeWarning):
    """A series evaluation lost precision but still produced a value."""
