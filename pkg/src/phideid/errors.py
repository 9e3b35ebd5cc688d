"""Exception hierarchy shared by all phideid modules."""

from __future__ import annotations


class DeidError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DeidError, ValueError):
    pass


class InputError(DeidError, ValueError):
    pass


class ShapeError(InputError):
    pass


class CorpusParseError(DeidError):
    """Malformed markup; carries the 1-based line and 0-based column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column


class SpanConsistencyError(DeidError):
    def __init__(self, tag_id: str, expected: str, found: str):
        super().__init__(
            f"tag {tag_id!r}: text attribute {expected!r} does not match document substring {found!r}"
        )
        self.tag_id = tag_id


class SpanBoundsError(DeidError):
    pass


class SpanOverlapError(DeidError):
    def __init__(self, first, second):
        super().__init__(f"overlapping spans: {first} and {second}")
        self.pair = (first, second)


class SplitSizeError(DeidError, ValueError):
    pass


class EmptyTargetError(DeidError):
    """Every position in a batch carries the ignore sentinel."""


class SweepError(DeidError):
    pass


class MeasurementError(DeidError):
    pass


class TrainingDivergedError(DeidError):
    pass
