"""Transform on the hyperbolic half-plane H^2 toward a tangent Gaussian.

Points are written in geodesic polar coordinates ``(r, theta)`` about the
base point ``m`` using Riemannian-orthonormal tangent coordinates. The
direction is uniformised with a circle CDF and then sent to a uniform angle,
and the distance is matched to the reference radial law
``1 - exp(-r^2 / 2)`` of the standard Gaussian on the tangent plane.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import AmbiguousMedian
from ..geometry import UniformFlag, frechet_median, halfplane_exp, halfplane_log
from ..numerics import CircleCdf
from .base import Transform


def reference_radius(F):
    """Radius with CDF value ``F`` under the standard tangent Gaussian."""
    return np.sqrt(-2 * np.log1p(-np.clip(F, 0.0, 1.0)))


def reference_radius_cdf(r):
    return -np.expm1(-0.5 * np.asarray(r, dtype=float) ** 2)


def _direction_anchor(density) -> float | None:
    """Median of the direction law, or ``None`` when it looks uniform.

    Laws with a tie between candidate medians (for instance any law that
    is symmetric under a half turn) fall back to the anchor 0; any anchor
    gives a valid transform.
    """
    f = lambda pts: density(np.arctan2(pts[:, 1], pts[:, 0]))
    grid = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    vals = np.asarray(density(grid), dtype=float)
    if np.ptp(vals) <= 1e-12 * np.max(vals):
        return None
    try:
        med = frechet_median(density=f, p=2)
    except AmbiguousMedian:
        return 0.0
    if isinstance(med, UniformFlag):
        return None
    return float(np.arctan2(med[1], med[0]))


@dataclass(frozen=True)
class HalfPlaneTransform(Transform):
    """Maps a law on H^2 onto the exp_m image of the standard tangent Gaussian.

    ``model`` provides ``m``, ``radial_cdf(r, theta)``,
    ``radial_ppf(F, theta)`` and ``direction_density(theta)``.
    """

    model: object
    space: str = "halfplane"
    _dir: CircleCdf | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        anchor = _direction_anchor(self.model.direction_density)
        if anchor is not None:
            object.__setattr__(self, "_dir", CircleCdf(self.model.direction_density, anchor))

    @property
    def m(self) -> np.ndarray:
        return np.asarray(self.model.m, dtype=float)

    def to_tangent(self, x) -> np.ndarray:
        """Riemannian-orthonormal normal coordinates of ``x`` at ``m``."""
        return halfplane_log(self.m, np.atleast_2d(x)) / self.m[1]

    def from_tangent(self, v) -> np.ndarray:
        return halfplane_exp(self.m, np.atleast_2d(v) * self.m[1])

    def forward(self, x):
        v = self.to_tangent(x)
        r = np.hypot(v[:, 0], v[:, 1])
        theta = np.arctan2(v[:, 1], v[:, 0])
        F = self.model.radial_cdf(r, theta)
        rn = reference_radius(F)
        tn = theta if self._dir is None else self._dir.transform(theta)
        return self.from_tangent(rn[:, None] * np.stack([np.cos(tn), np.sin(tn)], axis=1))

    def inverse(self, y):
        v = self.to_tangent(y)
        rn = np.hypot(v[:, 0], v[:, 1])
        tn = np.arctan2(v[:, 1], v[:, 0])
        theta = tn if self._dir is None else self._dir.untransform(tn)
        r = self.model.radial_ppf(reference_radius_cdf(rn), theta)
        return self.from_tangent(r[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=1))


def pit_halfplane(model, x) -> np.ndarray:
    return HalfPlaneTransform(model).forward(x)
