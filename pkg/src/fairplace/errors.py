"""Exception types and the violation record shared by every report-style check."""

from __future__ import annotations

from dataclasses import dataclass


class FairplaceError(Exception):
    """Base class for all library errors."""


class InvalidArgument(FairplaceError, ValueError):
    pass


class RangeError(FairplaceError, OverflowError):
    pass


class InvalidSolution(FairplaceError, ValueError):
    pass


class ResourceLimit(FairplaceError, RuntimeError):
    """Raised when an exhaustive routine would exceed its configured cap."""


class UnsupportedConfiguration(FairplaceError, ValueError):
    pass


class InfeasibleRounding(FairplaceError, RuntimeError):
    pass


class InvariantViolation(FairplaceError, AssertionError):
    """An in-run proof invariant failed. Always indicates a bug."""


@dataclass(frozen=True)
class Violation:
    check: str
    location: str
    detail: str

    def to_dict(self) -> dict:
        return {"check": self.check, "location": self.location, "detail": self.detail}
