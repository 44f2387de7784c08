"""Exception hierarchy for messcore.

Every error raised on purpose by the package derives from MessCoreError, so a
scan can catch one class per row and keep going.
"""

from __future__ import annotations


class MessCoreError(Exception):
    """Base class for all messcore errors."""


class ClassificationError(MessCoreError):
    """An isometry expected to be hyperbolic is elliptic or parabolic."""

    def __init__(self, kind: str, trace: float):
        self.kind = kind
        self.trace = trace
        super().__init__(f"non-hyperbolic element ({kind}): |trace| = {abs(trace):.12g} <= 2")


class PreconditionError(MessCoreError, ValueError):
    """An operation was called outside its documented domain."""


class RangeError(MessCoreError, ValueError):
    """A numeric input is outside the range the construction can represent."""


class ConfigurationError(MessCoreError, ValueError):
    """An AdS2 configuration cannot be realized with the requested parameters."""


class InvalidAutomorphismError(MessCoreError, ValueError):
    """A mapping class does not preserve the surface relator."""


class UnsupportedLaminationError(MessCoreError, ValueError):
    """A multicurve is not carried by any library pants decomposition."""


class InternalConsistencyError(MessCoreError):
    """Two independent computations that must agree did not."""


class NonConvergenceError(MessCoreError):
    """A numerical solver stopped without meeting its tolerance."""

    def __init__(self, message: str, residual: float, result=None):
        self.residual = residual
        self.result = result
        super().__init__(f"{message} (residual {residual:.3e})")


class BudgetExhaustedError(MessCoreError):
    """Universal-cover enumeration did not stabilize between two word budgets."""

    def __init__(self, partial_count: int, budget: int, larger_count: int, larger_budget: int):
        self.partial_count = partial_count
        self.budget = budget
        self.larger_count = larger_count
        self.larger_budget = larger_budget
        super().__init__(
            f"count {partial_count} at word budget {budget} differs from "
            f"{larger_count} at budget {larger_budget}"
        )


class SpecValidationError(MessCoreError, ValueError):
    """An ExperimentSpec field failed validation; `path` is the dotted field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class CausalCharacterError(MessCoreError, TypeError):
    """Two points expected to be spacelike-separated are timelike or lightlike."""


class ArcPreconditionError(PreconditionError):
    """A pair of arcs failed one of the comparison preconditions.

    `reason` is one of "endpoints", "convexity" or "nesting".
    """

    def __init__(self, reason: str, message: str):
        self.reason = reason
        super().__init__(f"{reason}: {message}")
