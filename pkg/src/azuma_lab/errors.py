"""Exception hierarchy shared by every module."""

from __future__ import annotations


class AzumaLabError(Exception):
    """Base class for all errors raised by azuma_lab."""


class BoundDomainError(AzumaLabError, ValueError):
    """A bound was evaluated outside the parameter range it is defined on."""


class _IndexedError(AzumaLabError):
    # Carries the index of the Monte Carlo trial that failed; survives pickling
    # so worker processes can report it.
    def __init__(self, message: str, trial: int | None = None):
        super().__init__(message)
        self.trial = trial

    def __reduce__(self):
        return (type(self), (self.args[0], self.trial))

    def with_trial(self, trial: int):
        return type(self)(f"trial {trial}: {self.args[0]}", trial)


class BudgetViolation(_IndexedError):
    """An adversary overspent (upper tail) or underspent (lower tail) its mean budget."""


class SupportViolation(_IndexedError):
    """An adversary proposed an increment outside ``[0, c]``."""


class IllegalToss(AzumaLabError):
    """A strategy tossed a ball that is not in the reservoir, or exceeded the toss budget."""


class IllegalRemoval(AzumaLabError):
    """A strategy asked to remove a ball that is not in the named bin."""


class StrategyStalled(AzumaLabError):
    """A strategy kept its toss budget unspent for too many consecutive steps."""


class CollisionNeverAchieved(AzumaLabError):
    """No counterexample trial reached the all-in-one-bin collision."""


class TooLarge(AzumaLabError):
    """An exact enumeration would exceed its path cap."""
