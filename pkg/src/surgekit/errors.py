"""Exception hierarchy for the surgekit toolkit.

Every error raised by surgekit derives from :class:`SurgeError`, so callers
(and the CLI) can catch one base class. Loader errors carry enough context
(line numbers, offending ids) to locate the problem in the input file.
"""

from __future__ import annotations


class SurgeError(Exception):
    """Base class for all surgekit errors."""


# ---------------------------------------------------------------------------
# ingest


class MissingFile(SurgeError):
    def __init__(self, path):
        super().__init__(f"file not found: {path}")
        self.path = str(path)


class ParseError(SurgeError):
    def __init__(self, message: str, line: int | None = None):
        loc = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line


class DuplicateId(SurgeError):
    def __init__(self, point_id: int):
        super().__init__(f"duplicate point id {point_id}")
        self.point_id = point_id


class ShapeMismatch(SurgeError):
    pass


class UnknownVariable(SurgeError):
    def __init__(self, name: str):
        super().__init__(f"unknown forcing variable {name!r}")
        self.name = name


class NonFinite(SurgeError):
    def __init__(self, location: str):
        super().__init__(f"non-finite or out-of-range value at {location}")
        self.location = location


class OutOfBounds(SurgeError):
    pass


# ---------------------------------------------------------------------------
# tides / events


class LengthMismatch(SurgeError):
    pass


class NonUniformSampling(SurgeError):
    pass


# ---------------------------------------------------------------------------
# features


class NoLandfall(SurgeError):
    pass


class EmptyWindow(SurgeError):
    pass


class EmptyNeighborhood(SurgeError):
    pass


class DegenerateColumn(SurgeError):
    def __init__(self, name: str):
        super().__init__(f"zero-variance column {name!r}")
        self.name = name


# ---------------------------------------------------------------------------
# models


class NonFiniteLoss(SurgeError):
    pass


class EmptyTrainingSet(SurgeError):
    pass


class SchemaMismatch(SurgeError):
    pass


# ---------------------------------------------------------------------------
# eval


class ZeroVariance(SurgeError):
    pass


class NoData(SurgeError):
    def __init__(self, point_id):
        super().__init__(f"no data for point {point_id}")
        self.point_id = point_id


class NoEvents(SurgeError):
    def __init__(self, station: str):
        super().__init__(f"no events for station {station!r}")
        self.station = station


# ---------------------------------------------------------------------------
# pipeline


class EmptySelection(SurgeError):
    pass


class TooFewStorms(SurgeError):
    pass


class ConfigError(SurgeError):
    pass


class StageError(SurgeError):
    """Wraps a failure inside a pipeline stage with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
