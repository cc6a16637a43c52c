"""Exception hierarchy.

Every error carries ``where`` (``module.operation``) so the CLI can name the
failing stage in its message.
"""

from __future__ import annotations


class LvlkitError(Exception):
    where = "lvlkit"

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.where}: {msg}" if msg else self.where


# model
class EmptyStream(LvlkitError):
    where = "model.validate_session"


class NonMonotonicTime(LvlkitError):
    where = "model.validate_session"

    def __init__(self, indices, stream: str = ""):
        self.indices = [int(i) for i in indices]
        super().__init__(f"timestamps decrease in {stream or 'stream'} at indices {self.indices}")


class MissingAnthropometry(LvlkitError):
    where = "model.validate_session"


class OutOfRange(LvlkitError):
    where = "model.validate_session"


# ingest
class MalformedHeader(LvlkitError):
    where = "ingest.parse_stream"


class BadFieldCount(LvlkitError):
    where = "ingest.parse_stream"

    def __init__(self, line: int, expected: int, got: int):
        self.line = line
        super().__init__(f"line {line}: expected {expected} fields, got {got}")


class NonNumericValue(LvlkitError):
    where = "ingest.parse_stream"

    def __init__(self, line: int, column: str, value: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column!r}: cannot parse {value!r}")


class BadSide(NonNumericValue):
    pass


class MixedSides(LvlkitError):
    where = "ingest.parse_stream"


class NoTemporalOverlap(LvlkitError):
    where = "ingest.align"


class EvenWindow(LvlkitError):
    where = "ingest.smooth_pressure"


class ManifestError(LvlkitError):
    where = "ingest.load_manifest"


# gait
class StreamTooShort(LvlkitError):
    where = "gait.detect_swing"


class InsufficientSwingSamples(LvlkitError):
    where = "gait.region_thresholds"


# kvlu
class TooFewSamples(LvlkitError):
    where = "kvlu.compute_angle_threshold"


class NoCycles(LvlkitError):
    where = "kvlu.kvlu_detection_rate"


# lvl
class DegeneratePairs(LvlkitError):
    where = "lvl.fit_pressure_height_model"


class NoAnchor(LvlkitError):
    where = "lvl.estimate_lvl_realtime"


class FewerThanTwoAnchors(LvlkitError):
    where = "lvl.correct_drift_retrospective"


# sim
class InvalidConfig(LvlkitError):
    where = "sim.generate_session"


# pipeline
class InvalidPipelineConfig(LvlkitError):
    where = "pipeline.PipelineConfig"


# eval
class EmptyGroup(LvlkitError):
    where = "evaluation.mae"


class NonPositiveTruth(LvlkitError):
    where = "evaluation.accuracy_pct"
