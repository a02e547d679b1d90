"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A precondition on an argument was violated."""


class ParseError(ValueError):
    """Malformed point file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SelectionError(RuntimeError):
    """A bandwidth selector could not pick a bandwidth.

    The evaluated curve is attached as ``curve`` so callers can still
    inspect or export it.
    """

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve


class NumericalSupportError(ArithmeticError):
    """Importance sampler hit a point outside the pilot's support."""


class InfeasibleLevelError(RuntimeError):
    """Rejection sampler exceeded its cap; the level is near the density maximum."""
