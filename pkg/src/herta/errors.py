"""Exception types shared across the package."""


class HertaError(Exception):
    """Base class for all package errors."""


class ParseError(HertaError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyGraph(HertaError):
    """Edge-list input contained no usable lines."""


class NonPositiveLambda(HertaError):
    """Regularization weight must be > 0."""


class BadParams(HertaError):
    """Configuration value outside its documented range."""


class DimensionMismatch(HertaError):
    """Operands with incompatible shapes."""


class BadDistribution(HertaError):
    """Sampling probabilities invalid (negative, NaN, or not summing to 1)."""


class NotPositiveDefinite(HertaError):
    """Matrix expected to be symmetric positive definite is not."""


class NoConvergence(HertaError):
    """Iteration cap reached before the requested tolerance."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class DegenerateScores(HertaError):
    """Leverage-score mass vanished on a graph that has edges."""


class NotOneHot(HertaError):
    """Cross-entropy targets must be one-hot rows."""


class TooLargeForDense(HertaError):
    """Dense test-mode oracle refused; instance exceeds the desk-scale cap."""
