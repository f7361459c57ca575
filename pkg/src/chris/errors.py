"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ChrisError(Exception):
    """Base class for every error raised by this package."""


class InvalidHr(ChrisError, ValueError):
    pass


class ParseError(ChrisError, ValueError):
    """A trace row could not be parsed.

    Attributes:
        row: 0-based data row index (header excluded).
        column: offending column name.
    """

    def __init__(self, row: int, column: str, message: str = "") -> None:
        self.row = row
        self.column = column
        detail = f": {message}" if message else ""
        super().__init__(f"row {row}, column {column!r}{detail}")


class MissingColumn(ChrisError, ValueError):
    pass


class TraceTooShort(ChrisError, ValueError):
    pass


class NoPeaks(ChrisError):
    """The adaptive-threshold estimator found fewer than two peaks."""


class ShapeMismatch(ChrisError, ValueError):
    pass


class UncalibratedQuantization(ChrisError, ValueError):
    pass


class EmptyDataset(ChrisError, ValueError):
    pass


class EmptyWindowSet(ChrisError, ValueError):
    pass


class MissingLabels(ChrisError, ValueError):
    pass


class NoFeasibleConfig(ChrisError):
    pass


class ConstraintUnsatisfiable(ChrisError):
    pass
