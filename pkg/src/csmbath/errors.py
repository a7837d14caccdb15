"""Error types shared across the engines."""


class ParameterError(ValueError):
    """Invalid argument value (non-positive gamma, bad truncation, ...)."""


class UnsupportedModeError(RuntimeError):
    """Operation requires explicit couplings but the set is infinite."""


class ChainBreakdownError(RuntimeError):
    """Three-term recursion terminated early (degenerate coupling multiset).

    Carries the number of chain sites that were completed before the
    off-diagonal coefficient underflowed.
    """

    def __init__(self, achieved: int, requested: int):
        self.achieved = achieved
        self.requested = requested
        super().__init__(
            f"recursion broke down after {achieved} of {requested} sites"
        )


class CapacityError(RuntimeError):
    """Predicted problem size exceeds the configured budget."""


class NumericError(RuntimeError):
    """Internal numerical fault (solver non-convergence, NaN during evolution)."""
