"""Matrix Fisher transform on SO(3)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..geometry import as_rotation, axis_angle, from_axis_angle
from ..numerics import ScalarChebyshevCdf, solve_increasing
from .base import Transform


def angle_weight(omega, kappa: float):
    """Haar angle density times ``exp(4 kappa cos^2(omega/2))``, divided by ``e^{4 kappa}``."""
    s2 = np.sin(np.asarray(omega, dtype=float) / 2) ** 2
    return np.exp(-4 * kappa * s2) * s2


def haar_angle_cdf(theta):
    """``(theta - sin theta) / pi``: CDF of the rotation angle under Haar measure."""
    theta = np.asarray(theta, dtype=float)
    return (theta - np.sin(theta)) / np.pi


def haar_angle_ppf(q):
    q = np.asarray(q, dtype=float)
    out = solve_increasing(haar_angle_cdf, q, 0.0, np.pi, ftol=1e-15)
    return np.where(q <= 0, 0.0, np.where(q >= 1, np.pi, out))


def matrix_fisher_angle_cdf(kappa: float) -> ScalarChebyshevCdf:
    """Normalised ``F_kappa(theta) / F_kappa(pi)`` as a spectral CDF on [0, pi]."""
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    return ScalarChebyshevCdf(lambda w: angle_weight(w, kappa), 0.0, np.pi)


def matrix_fisher_angle_map(t, kappa: float):
    """Rotation angle ``u`` with the same Haar CDF value as ``t`` has under the model."""
    t = np.asarray(t, dtype=float)
    if kappa == 0:
        return t.copy()
    return haar_angle_ppf(matrix_fisher_angle_cdf(kappa)(t))


@dataclass(frozen=True)
class MatrixFisherTransform(Transform):
    """Keeps the rotation axis of ``M^T X`` and remaps its angle."""

    M: np.ndarray
    kappa: float
    space: str = "rotation"
    _cdf: ScalarChebyshevCdf | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        as_rotation(self.M)
        if self.kappa > 0:
            object.__setattr__(self, "_cdf", matrix_fisher_angle_cdf(self.kappa))

    def _remap(self, X, fwd: bool):
        X = np.asarray(X, dtype=float).reshape(-1, 3, 3)
        if self._cdf is None:
            return X.copy()
        R = np.swapaxes(self.M, -1, -2)[None] @ X
        axis, angle = axis_angle(R)
        if fwd:
            new = haar_angle_ppf(self._cdf(angle))
        else:
            new = self._cdf.inverse(haar_angle_cdf(angle))
        return self.M[None] @ from_axis_angle(axis, new)

    def forward(self, X):
        return self._remap(X, True)

    def inverse(self, Y):
        return self._remap(Y, False)
