"""Exception types shared across the package."""


class PursuitError(Exception):
    """Base class for all package-specific errors."""


class InvalidConfig(PursuitError, ValueError):
    """A configuration value violates its documented constraints."""


class InvalidPosition(PursuitError, ValueError):
    """A grid position is off the map or not a road cell."""


class ContractViolation(PursuitError, ValueError):
    """An operation was invoked with arguments that break its contract."""


class ConfigFileError(PursuitError, ValueError):
    """A run-configuration file could not be parsed.

    Carries the offending line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
