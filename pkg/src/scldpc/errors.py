"""Exception and warning types shared across the package.

Every error raised on purpose by this package derives from ``ScldpcError``
so callers can catch the whole family at once (the CLI maps them to exit
code 3).
"""

from __future__ import annotations


class ScldpcError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(ScldpcError):
    """Component matrices do not share the required shape."""


class CouplingTooShort(ScldpcError):
    """Tail-biting requires coupling length L > coupling width w."""


class NoSpreadingDefined(ScldpcError):
    """No edge spreading is registered for the requested degree pair."""


class DegenerateEnsemble(ScldpcError):
    """Density evolution cannot converge even on a perfect channel."""


class PositionStructureMissing(ScldpcError):
    """The operation needs per-column time positions, but the matrix
    carries no coupling metadata."""


class OptimizerFailure(ScldpcError):
    """The spectral-shape optimizer failed to meet its tolerance."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ScaleExceeded(ScldpcError):
    """Exact enumeration was requested beyond its supported scale."""


class LiftInfeasible(ScldpcError):
    """No disjoint permutation assignment exists for the requested lift."""


class WindowTooSmall(ScldpcError):
    """Sliding-window decoding needs a window of at least w+1 positions."""


class BudgetExceeded(ScldpcError):
    """A simulation request exceeds the configured resource budget."""


class UnknownTable(ScldpcError):
    """Unrecognized name passed to the table-reproduction command."""


class NonPositiveRateWarning(UserWarning):
    """Signal (not an error) that an ensemble has design rate <= 0.

    Degenerate ensembles are still allowed for analysis.
    """
