"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class AbuseDetectError(Exception):
    """Base class for all pipeline errors."""


class CorpusLoadError(AbuseDetectError):
    """A source file could not be read or parsed at all."""


class DuplicateIdError(AbuseDetectError):
    pass


class FoldError(AbuseDetectError):
    """Cross-validation split or per-fold evaluation failed."""

    def __init__(self, message: str, fold: int | None = None):
        super().__init__(message if fold is None else f"fold {fold}: {message}")
        self.fold = fold


class ContractViolation(ValueError, AbuseDetectError):
    """An operation was called with inputs outside its declared domain."""


class NumericError(ArithmeticError, AbuseDetectError):
    """A computation produced a non-finite value."""


class TrainingError(AbuseDetectError):
    pass


class NotFittedError(AbuseDetectError):
    pass


class ArtifactError(AbuseDetectError):
    """A persisted model artifact is missing or unusable."""


class EncoderUnavailableError(ArtifactError):
    pass


class ArtifactVersionError(ArtifactError):
    pass


class ArtifactChecksumError(ArtifactError):
    pass
