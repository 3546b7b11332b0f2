"""Exception types shared across the package."""


class RejectedInputError(ValueError):
    """An argument violated an operation's precondition (shape, range, finiteness)."""


class NumericError(ArithmeticError):
    """A computation produced NaN or Inf.

    ``op`` names the primitive whose output was non-finite.
    """

    def __init__(self, op: str, message: str = ""):
        self.op = op
        super().__init__(f"non-finite value produced by '{op}'" + (f": {message}" if message else ""))


class EmptyBufferError(LookupError):
    """Sampling was requested from an empty replay buffer."""


class UsageError(Exception):
    """Invalid configuration or API misuse. ``field`` names the offending setting when known."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(message)
