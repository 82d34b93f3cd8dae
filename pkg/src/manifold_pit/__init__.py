"""Probability integral transforms on manifolds and goodness-of-fit testing.

Each supported model is pushed onto the reference law of its space
(uniform on compact spaces, a tangent Gaussian on the hyperbolic plane),
after which any test of that reference law becomes a goodness-of-fit test.
"""

from .errors import (
    AmbiguousMedian,
    DegenerateSample,
    DomainError,
    ManifoldPitError,
    NonConvergence,
    NonMonotone,
    PoleError,
    RangeError,
    ZeroCoordinate,
)
from .gof import fisher_battery, gof_fitted, gof_fixed
from .models import (
    AcgModel,
    DirichletModel,
    FisherModel,
    LogNormalRadialModel,
    MardiaDrydenModel,
    MatrixFisherModel,
    ProjectedNormalModel,
    TangentGaussianModel,
    sample,
    sample_uniform,
)
from .transforms import build_transform
from .uniformity import TestReport

__version__ = "0.1.0"

__all__ = [
    "AcgModel",
    "AmbiguousMedian",
    "DegenerateSample",
    "DirichletModel",
    "DomainError",
    "FisherModel",
    "LogNormalRadialModel",
    "ManifoldPitError",
    "MardiaDrydenModel",
    "MatrixFisherModel",
    "NonConvergence",
    "NonMonotone",
    "PoleError",
    "ProjectedNormalModel",
    "RangeError",
    "TangentGaussianModel",
    "TestReport",
    "ZeroCoordinate",
    "build_transform",
    "fisher_battery",
    "gof_fitted",
    "gof_fixed",
    "sample",
    "sample_uniform",
]
