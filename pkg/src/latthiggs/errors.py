"""Exception types shared across the package."""


class LatthiggsError(Exception):
    """Base class for errors raised by this package."""


class BudgetExceededError(LatthiggsError):
    """An exact enumeration would exceed the configured state-count budget."""


class OutsideRegimeError(LatthiggsError):
    """Series parameters lie outside the proven convergence window.

    Raised instead of emitting a truncated sum whose tail cannot be bounded.
    """
