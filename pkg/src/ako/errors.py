"""Exception types raised across the package."""


class AkoError(Exception):
    """Base class for all package errors."""


class DomainError(AkoError, ValueError):
    """An argument lies outside the domain of the operation."""


class ShapeError(AkoError, ValueError):
    """Array dimensions are inconsistent."""


class DecompositionError(AkoError, ArithmeticError):
    """Cholesky factorization failed at a given pivot."""

    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot} failed)")


class DegenerateFeatureError(AkoError, ValueError):
    """A design column has zero variance."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} has zero variance")


class KnockoffConstructionError(AkoError, ArithmeticError):
    """The knockoff conditional covariance is not positive semi-definite."""


class DataError(AkoError, ValueError):
    """Input data contain NaN values or out-of-range indices."""


class ConfigError(AkoError, ValueError):
    """Invalid configuration parameter."""


class PipelineError(AkoError, RuntimeError):
    """Every bootstrap of an aggregation run failed."""
