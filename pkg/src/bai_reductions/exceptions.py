"""Exception hierarchy shared across the package."""


class UsageError(ValueError):
    """Raised when an operation is called with arguments outside its contract."""


class ProtocolError(UsageError):
    """Raised when a fixed-confidence session is driven out of order."""


class InvalidInstanceError(ValueError):
    """Raised when a bandit instance violates the unique-best-arm invariant."""


class InfeasibleInstanceError(ValueError):
    """Raised when a generator's parameters admit no valid instance."""
