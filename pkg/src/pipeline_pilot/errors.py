"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PipelinePilotError(Exception):
    """Base class for all package errors."""


class CorpusFormatError(PipelinePilotError):
    """A corpus file line failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateDatasetIdError(CorpusFormatError):
    """Two corpus records share a dataset id."""


class PipelineValidationError(PipelinePilotError):
    """A pipeline document violates the DSL contract."""

    def __init__(self, message: str, stage_index: int | None = None):
        self.stage_index = stage_index
        if stage_index is not None:
            message = f"stage {stage_index}: {message}"
        super().__init__(message)


class StageExecutionError(PipelinePilotError):
    """A pipeline stage failed while fitting or transforming."""

    def __init__(self, message: str, stage_index: int, primitive: str):
        self.stage_index = stage_index
        self.primitive = primitive
        super().__init__(f"stage {stage_index} ({primitive}): {message}")


class SchemaMismatchError(PipelinePilotError):
    """Prediction-time data does not match the training schema."""


class VectorStoreError(PipelinePilotError):
    """A vector file is malformed or a lookup key is absent."""


class DimensionMismatchError(PipelinePilotError):
    """Two vectors or a network and its input disagree on dimension."""
