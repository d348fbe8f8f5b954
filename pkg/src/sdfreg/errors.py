"""Exception types shared across the package."""


class SdfRegError(Exception):
    """Base class for all package errors."""


class MeshFormatError(SdfRegError):
    """Raised when an OBJ file cannot be parsed. Carries the line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidInputError(SdfRegError, ValueError):
    """Raised when an argument violates a documented precondition."""


class SolverError(SdfRegError):
    """Raised when an iterative solver fails to converge."""
