"""Exception types shared across the package.

The CLI maps them to exit codes: InstanceError -> 2, BudgetExhausted -> 3,
InvariantBreach -> 1.
"""


class InstanceError(ValueError):
    """Malformed or structurally invalid input."""


class BudgetExhausted(RuntimeError):
    """A randomized procedure ran out of retries/resamples.

    ``diagnostics`` carries whatever the procedure recorded about its attempts.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InvariantBreach(AssertionError):
    """An internal invariant failed; indicates a bug rather than bad luck."""
