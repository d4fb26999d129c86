"""Exception types shared across the package.

The CLI maps :class:`ConfigError` to exit code 2 and
:class:`NumericalGuardError` to exit code 3.
"""


class NoonforgeError(Exception):
    pass


class ConfigError(NoonforgeError, ValueError):
    """Invalid parameter or configuration value.

    ``field`` names the offending parameter when it is known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalGuardError(NoonforgeError, ArithmeticError):
    """A numerical guard tripped: truncation leakage, loss of positivity, etc."""
