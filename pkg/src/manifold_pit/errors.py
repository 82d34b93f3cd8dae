"""Exception types shared across the package."""


class ManifoldPitError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ManifoldPitError, ValueError):
    """Argument outside the domain of a special function."""


class NonConvergence(ManifoldPitError, RuntimeError):
    """An iterative numerical routine exhausted its budget."""


class NonMonotone(ManifoldPitError, ValueError):
    """A CDF failed to bracket the requested level."""


class PoleError(ManifoldPitError, ValueError):
    """Point lies on a pole of a tangent-normal chart (measure zero)."""


class RangeError(ManifoldPitError, ValueError):
    """Radius beyond the cut locus of an exponential chart."""


class AmbiguousMedian(ManifoldPitError, ValueError):
    """The Frechet median is not numerically unique."""


class DegenerateSample(ManifoldPitError, ValueError):
    """Sample too degenerate for the requested estimator."""


class ZeroCoordinate(ManifoldPitError, ValueError):
    """Compositional data with a non-positive coordinate."""
