class HawkchainError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameter(HawkchainError, ValueError):
    """A parameter is outside its documented domain."""


class DimensionMismatch(HawkchainError, ValueError):
    """Objects defined on different chains or Hilbert spaces were combined."""


class NumericalFailure(HawkchainError, RuntimeError):
    """An integrator or optimizer did not meet its tolerance."""


class ConfigError(HawkchainError, ValueError):
    """Run configuration could not be parsed or validated.

    ``line`` carries the 1-based line number in the config file when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
