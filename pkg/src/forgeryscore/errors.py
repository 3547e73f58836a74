"""Exception hierarchy.

Every error raised on purpose by this package derives from ``ForgeryScoreError``
so callers (and the CLI exit-code mapping) can catch the family at once.
"""

from __future__ import annotations


class ForgeryScoreError(Exception):
    """Base class for all package errors."""


class DegenerateRegion(ForgeryScoreError, ValueError):
    """A box or quad with zero/negative area, negative or non-finite coordinates."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class ReportSyntax(ForgeryScoreError, ValueError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class UnknownVerdict(ForgeryScoreError, ValueError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class EmptyGroundTruth(ForgeryScoreError, ValueError):
    pass


class EmbeddingUnavailable(ForgeryScoreError, RuntimeError):
    """The embedding backend could not produce vectors (network, HTTP, retries exhausted)."""


class ProtocolViolation(ForgeryScoreError, RuntimeError):
    """The embedding service answered, but not in the agreed shape."""


class DimensionMismatch(ForgeryScoreError, ValueError):
    pass


class EmptyCorpus(ForgeryScoreError, ValueError):
    pass


class GroupTooSmall(ForgeryScoreError, ValueError):
    pass


class ShapeMismatch(ForgeryScoreError, ValueError):
    pass


class SchemaViolation(ForgeryScoreError, ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")
        self.line = line
        self.path = path


class JoinMismatch(ForgeryScoreError, ValueError):
    def __init__(self, missing_predictions: list[str], missing_ground_truth: list[str]):
        parts = []
        if missing_predictions:
            parts.append(f"no prediction for: {', '.join(missing_predictions)}")
        if missing_ground_truth:
            parts.append(f"no ground truth for: {', '.join(missing_ground_truth)}")
        super().__init__("; ".join(parts) or "corpora do not join")
        self.missing_predictions = missing_predictions
        self.missing_ground_truth = missing_ground_truth


class ConfigError(ForgeryScoreError, ValueError):
    pass
