"""Exception hierarchy shared by the construction, verification and persistence layers."""

from typing import Any


class ConstructionError(RuntimeError):
    """Base class for every failure raised by the library code."""


class ChainError(ConstructionError):
    """A family of intervals/rectangles violates a circular-chain requirement."""


class CrookednessError(ConstructionError):
    """A map could not be certified crooked."""


class BreakpointBudgetError(ConstructionError):
    """A zigzag prototype would need more breakpoints than allowed."""


class FrequencyBudgetError(ConstructionError):
    """The Fourier projection needs more harmonics than allowed."""


class ReturnPeriodError(ConstructionError):
    """The auxiliary flow has no first return on vertical circles."""


class StoreError(ConstructionError):
    """A persisted run file is missing or corrupt."""


class ConfigError(ConstructionError):
    """The run configuration is invalid."""


class BudgetExhausted(ConstructionError):
    """A stage search ran out of budget before all properties verified.

    Args:
        property_id: The property that kept failing (e.g. "P1", "P2").
        message: Human readable description.
        counterexample: Last counterexample payload, JSON serializable.
    """

    def __init__(self, property_id: str, message: str, counterexample: Any = None):
        super().__init__(f"[{property_id}] {message}")
        self.property_id = property_id
        self.counterexample = counterexample


class NumericalError(ConstructionError):
    """A numeric routine failed while searching a stage."""
