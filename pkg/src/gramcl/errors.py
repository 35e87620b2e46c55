"""Exception hierarchy shared across the package."""


class GramclError(Exception):
    """Base class for all package errors."""


class ValidationError(GramclError):
    """Input data violates a documented invariant (NaN features, bad label, ...)."""


class DimensionMismatchError(ValidationError):
    """Vectors or matrices with inconsistent shapes."""


class ParameterError(GramclError):
    """An operation was configured with an out-of-range parameter."""


class CorruptionError(GramclError):
    """On-disk store bytes are inconsistent with the manifest."""


class UnsupportedFormatError(GramclError):
    """Unknown magic, dtype, or format version on disk."""


class InfeasibleSplitError(GramclError):
    """A task split cannot be constructed (e.g. more tasks than classes)."""


class MissingDomainError(GramclError):
    """A domain-incremental split was requested on a store without domains."""


class UndefinedPrototypeError(GramclError):
    """A class mean was requested for a class with zero samples."""


class SingularityError(GramclError):
    """A factorization failed even after jitter escalation."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class DegenerateSplitError(GramclError):
    """A task is too small to be split for cross-validation."""


class StepSizeError(GramclError):
    """The iterative solver diverged; the learning rate is too large."""


class UndefinedSimilarityError(GramclError):
    """Cosine similarity requested against a zero-norm vector."""


class ConfigError(GramclError):
    """A run configuration document is invalid."""
