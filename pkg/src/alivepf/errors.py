"""Exception types shared across the package."""

from __future__ import annotations


class CapExceeded(RuntimeError):
    """A filter step hit its trial cap before collecting enough alive particles.

    ``partial_run`` holds the completed steps (a FilterRun) when the cap was
    hit mid-run, so the failure can be inspected post mortem.
    """

    def __init__(self, step: int, trials: int, partial_run=None):
        super().__init__(
            f"trial cap reached at step {step} after {trials} draws "
            f"without collecting the required number of alive particles"
        )
        self.step = step
        self.trials = trials
        self.partial_run = partial_run


class AllZeroWeights(ValueError):
    """Resampling was asked to draw from a weight vector that sums to zero."""


class InitFailed(RuntimeError):
    """Chain initialisation exhausted its retry budget."""

    def __init__(self, attempts: int):
        super().__init__(f"no viable starting point after {attempts} attempts")
        self.attempts = attempts


class GridTooCoarse(ValueError):
    """Doubling the quadrature grid moved the posterior weights too much."""


class InvalidMoments(ValueError):
    """Moment inputs are mutually inconsistent or out of range."""


class ParseError(ValueError):
    """A data file row could not be parsed."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class NonPositiveIndex(ValueError):
    """A price/index series contains a value <= 0, so log returns are undefined."""


class LeanStepError(RuntimeError):
    """The requested quantity needs dead-particle states, which this step dropped."""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""
