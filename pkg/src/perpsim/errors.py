"""Exception types shared across the package."""


class PerpsimError(Exception):
    """Base class for all package errors."""


class DomainError(PerpsimError, ValueError):
    """Input outside an operation's stated domain (bad parameter, wrong regime)."""


class NoRootError(PerpsimError, ArithmeticError):
    """A root-finding problem has no solution on the searchable range.

    ``reason`` distinguishes a function that stays below the target from one
    that diverges before crossing it.
    """

    def __init__(self, message: str, reason: str = "subcritical"):
        super().__init__(message)
        self.reason = reason


class InsufficientDataError(PerpsimError, RuntimeError):
    """A conditional estimate had no (or too few) conditioning events."""

    def __init__(self, message: str, attempted: int = 0):
        super().__init__(message)
        self.attempted = attempted


class NonPlateauError(PerpsimError, RuntimeError):
    """A tail-constant fit failed its plateau diagnostic."""

    def __init__(self, message: str, ratio: float):
        super().__init__(message)
        self.ratio = ratio


class RunawayCycleError(PerpsimError, RuntimeError):
    """A regenerative cycle exceeded the hard step cap."""
