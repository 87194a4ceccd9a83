# app/core/errors.py
from typing import List, Optional


class AnalysisError(ValueError):
    """Base class for every error raised by the analysis stages."""


class InsufficientDataError(AnalysisError):
    pass


class ZeroVarianceError(AnalysisError):
    pass


class DomainError(AnalysisError):
    """A value is outside the domain an operation is defined on."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class CollinearityError(AnalysisError):
    def __init__(self, message: str, columns: List[str]):
        super().__init__(message)
        self.columns = columns


class FilteringError(AnalysisError):
    """All particle weights vanished at one observation."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class EstimationError(AnalysisError):
    pass


class ConsistencyError(AnalysisError):
    pass


class IngestionError(AnalysisError):
    pass


class PipelineError(AnalysisError):
    pass
