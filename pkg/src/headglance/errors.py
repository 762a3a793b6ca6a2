"""Exception types shared across the library."""
from __future__ import annotations


class HeadglanceError(Exception):
    """Base class for library errors."""


class ParseError(HeadglanceError):
    """Raised when an input file fails to parse or violates invariants.

    ``rows`` holds up to the first 10 offending (row_number, message)
    pairs so callers can report actionable diagnostics.
    """

    def __init__(self, message: str, rows: list[tuple[int, str]] | None = None):
        self.rows = rows or []
        if self.rows:
            detail = "; ".join(f"row {n}: {msg}" for n, msg in self.rows[:10])
            message = f"{message} ({detail})"
        super().__init__(message)


class EstimationError(HeadglanceError):
    """Raised when a pose cannot be estimated from a landmark frame."""


class TrainingError(HeadglanceError):
    """Raised when a classifier fails to train (divergence, starvation)."""
