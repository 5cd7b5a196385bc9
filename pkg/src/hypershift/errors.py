"""Exception hierarchy shared by every hypershift module."""


class HypershiftError(Exception):
    """Base class for all library errors."""


class ConfigError(HypershiftError, ValueError):
    """A configuration or argument failed validation."""


class PrecisionUndecidable(HypershiftError):
    """A certified comparison or floor could not be decided at the maximum precision."""


class ZeroVector(HypershiftError, ValueError):
    pass


class SearchBudgetExceeded(HypershiftError):
    pass


class EmptyPattern(HypershiftError):
    """A block pattern truncates to the zero vector (raised only in strict mode)."""


class DegenerateGap(HypershiftError):
    """log r_{k+1} >= log r_k, which would violate the schedule invariants."""


class PatternMismatch(HypershiftError):
    """The block pattern w_k differs from the requested target v_l."""


class FloatRangeExceeded(HypershiftError):
    pass


class PhaseUncertain(HypershiftError):
    pass


class DivergenceViolated(HypershiftError):
    """The y-increments of a step provably (or apparently) sum to less than needed.

    ``bound`` carries the supremum estimate of y over the whole step when one is known.
    """

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class BudgetExceeded(HypershiftError):
    """Exact reach ended before the requested object; ``bracket`` holds what is known."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class OutOfReach(HypershiftError):
    """The step needed for a witness lies beyond exact reach."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class NoWitnessInBudget(HypershiftError):
    pass
