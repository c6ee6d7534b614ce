"""Exception types shared across the package."""


class SkrecoverError(Exception):
    """Base class for package-specific errors."""


class IncompatibleSketchError(SkrecoverError, ValueError):
    """Raised when merging sketches with different widths or hash seeds."""


class CounterOverflowError(SkrecoverError, OverflowError):
    """Raised instead of silently wrapping a bucket counter."""


class NonIdentifiableError(SkrecoverError, ValueError):
    """Raised when a likelihood is flat and a fit cannot single out a value."""


class DegenerateAggregateError(SkrecoverError, ValueError):
    """Raised when a product of experts has zero mass on the shared support."""


class EnumerationSizeError(SkrecoverError, ValueError):
    """Raised when a brute-force enumeration would exceed its size guard."""


class NumericError(SkrecoverError, RuntimeError):
    """Raised when a quadrature or sampler fails to reach its tolerance."""
