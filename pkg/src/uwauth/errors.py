"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument is outside the physically meaningful domain."""


class GeometryError(ValueError):
    """The anchor or node geometry cannot support the requested operation."""


class AccuracyError(RuntimeError):
    """A numerical routine could not reach its accuracy target.

    Carries the achieved error bound so callers can decide whether the
    partial result is still usable.
    """

    def __init__(self, message: str, achieved: float | None = None,
                 target: float | None = None):
        super().__init__(message)
        self.achieved = achieved
        self.target = target
