"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


# volume IO / geometry
class UnsupportedFormat(PipelineError):
    pass


class CorruptHeader(PipelineError):
    pass


class NonFiniteData(PipelineError):
    pass


class NonIntegralData(PipelineError):
    pass


class LabelOutOfRange(PipelineError):
    pass


class AlignmentError(PipelineError):
    pass


class DimsMismatch(AlignmentError):
    pass


class SpacingMismatch(AlignmentError):
    pass


class FrameMismatch(AlignmentError):
    pass


class EmptyMask(PipelineError):
    pass


# filters / texture
class InvalidSigma(PipelineError):
    pass


class NonPositiveBinWidth(PipelineError):
    pass


# clinical
class MissingLabelColumn(PipelineError):
    pass


class RangeViolation(PipelineError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class DuplicateSubjectId(PipelineError):
    pass


class AllMissingColumn(PipelineError):
    pass


# learning / evaluation
class SingleClass(PipelineError):
    pass


class MissingValues(PipelineError):
    pass


class DimensionMismatch(PipelineError):
    pass


class ClassTooSmall(PipelineError):
    pass


class TooFewValues(PipelineError):
    pass


class LengthMismatch(PipelineError):
    pass


class NoSharedFeatures(PipelineError):
    pass


class InvalidSpec(PipelineError):
    pass


class ConfigError(PipelineError):
    pass
