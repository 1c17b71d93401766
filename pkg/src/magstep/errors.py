"""Exception types shared across the package."""


class MagstepError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(MagstepError):
    """Matrix or grid dimensions are incompatible with the request."""


class MemoryCapError(MagstepError):
    """Requested grid exceeds the configured node cap."""


class NotConverged(MagstepError):
    """Eigensolver failed to reach the requested residual tolerance."""


class MinimizerAtEdge(MagstepError):
    """A genuine band minimum sits at the edge of the sampled range."""


class TableRangeExceeded(MagstepError):
    """A band-table lookup fell outside the tabulated range."""


class GammaZero(MagstepError):
    """The essential-spectrum formula requires a nonzero tilt gamma."""


class ScanRangeExhausted(MagstepError):
    """Widening the fiber-parameter scan hit the configured cap."""


class InsufficientDecay(MagstepError):
    """Eigenfunction mass near the artificial boundary is too large."""


class OrderBreakdown(MagstepError):
    """Observed convergence ratio is incompatible with second order."""


class ParseError(MagstepError):
    """Malformed configuration input."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(MagstepError):
    """A configuration value is outside its legal range."""
