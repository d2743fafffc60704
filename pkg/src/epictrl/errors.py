"""Exception types shared across the package."""


class EpictrlError(Exception):
    """Base class for all package errors."""


class ValidationError(EpictrlError, ValueError):
    """Bad input: malformed files, out-of-range parameters, broken invariants."""


class ParseError(ValidationError):
    """Edge-list or config file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif path is not None:
            where += " "
        super().__init__(where + message)


class InstanceTooLargeError(ValidationError):
    """Instance exceeds the cap of an exhaustive (oracle) routine."""


class SolverError(EpictrlError, RuntimeError):
    """A solver failed to reach an acceptable status."""
