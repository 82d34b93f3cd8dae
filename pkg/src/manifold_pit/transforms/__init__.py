"""Probability integral transforms onto the reference law of each space."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError
from ..models import (
    AcgModel,
    DirichletModel,
    FisherModel,
    LogNormalRadialModel,
    MardiaDrydenModel,
    MatrixFisherModel,
    ProjectedNormalModel,
    TangentGaussianModel,
    dirichlet_density,
)
from .base import IdentityTransform, Transform
from .halfplane import HalfPlaneTransform, pit_halfplane
from .rotation import MatrixFisherTransform
from .shape import MardiaDrydenTransform, md_transform
from .simplex import SimplexExpTransform, SimplexRadialTransform, pit_simplex_radial
from .sphere import (
    RotSymTransform,
    SphereDensityTransform,
    acg_transform,
    fisher_transform,
    pit_sphere,
    radial_rotsym_transform,
)


def build_transform(model, *, method: str = "default", approx: bool = False) -> Transform:
    """Transform pushing ``model`` onto the reference law of its space.

    ``method`` selects the simplex construction (``"radial"``, the default,
    or ``"exp"``); ``approx`` selects the small-angle Fisher form.
    """
    if isinstance(model, FisherModel):
        if model.kappa == 0:
            return IdentityTransform("sphere")
        if model.p == 3:
            return fisher_transform(model.mu, model.kappa, approx)
        k = model.kappa
        return radial_rotsym_transform(model.mu, lambda r: np.exp(k * (np.cos(r) - 1)))
    if isinstance(model, ProjectedNormalModel):
        mean = np.asarray(model.mean, dtype=float)
        size = np.linalg.norm(mean)
        if size == 0:
            return IdentityTransform("sphere")
        axis = mean / size
        return radial_rotsym_transform(axis, lambda r: model.density(_on_meridian(axis, r)))
    if isinstance(model, AcgModel):
        return acg_transform(model.A)
    if isinstance(model, MatrixFisherModel):
        return MatrixFisherTransform(np.asarray(model.M, dtype=float), model.kappa)
    if isinstance(model, MardiaDrydenModel):
        return MardiaDrydenTransform(model.mu, model.kappa, model.k)
    if isinstance(model, DirichletModel):
        dens = lambda y: dirichlet_density(model, y)
        if method in ("default", "radial"):
            return SimplexRadialTransform(dens, model.p)
        if method == "exp":
            return SimplexExpTransform(dens, model.p)
        raise DomainError(f"unknown simplex method {method!r}")
    if isinstance(model, (TangentGaussianModel, LogNormalRadialModel)):
        return HalfPlaneTransform(model)
    raise DomainError(f"no transform for {type(model).__name__}")


def _on_meridian(axis, r):
    """Points at colatitude ``r`` from ``axis`` along a fixed meridian."""
    from ..geometry import orthogonal_unit

    e = orthogonal_unit(axis)
    r = np.asarray(r, dtype=float)
    return np.multiply.outer(np.cos(r), axis) + np.multiply.outer(np.sin(r), e)


def invert(transform: Transform, y) -> np.ndarray:
    return transform.inverse(y)


__all__ = [
    "HalfPlaneTransform",
    "IdentityTransform",
    "MardiaDrydenTransform",
    "MatrixFisherTransform",
    "RotSymTransform",
    "SimplexExpTransform",
    "SimplexRadialTransform",
    "SphereDensityTransform",
    "Transform",
    "acg_transform",
    "build_transform",
    "fisher_transform",
    "invert",
    "md_transform",
    "pit_halfplane",
    "pit_simplex_radial",
    "pit_sphere",
    "radial_rotsym_transform",
]
