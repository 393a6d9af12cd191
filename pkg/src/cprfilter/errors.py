"""Exception types raised by the solver."""

from __future__ import annotations

from typing import Any


class ComputationError(RuntimeError):
    """A numerical routine failed (non-convergence, singular matrix, NaN input)."""


class DegenerateFilterError(ComputationError):
    """The adaptive filter strength is undefined for the given element state.

    Raised when the intermediate state is constant while its rate of change is
    not, so no modal filter can remove the excess energy.
    """


class BlowUpError(ComputationError):
    """The time integration produced non-finite or huge coefficients.

    :attr:`record` holds the partial run record up to the failing step.
    """

    def __init__(self, step: int, record: Any = None) -> None:
        super().__init__(f"solution blew up at step {step}")
        self.step = step
        self.record = record


class ConfigError(ValueError):
    """Invalid or contradictory experiment settings."""
