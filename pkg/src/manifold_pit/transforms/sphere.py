"""Transforms on spheres and real projective spaces.

Closed forms cover rotationally symmetric laws (Fisher, two-eigenvalue
ACG); :class:`SphereDensityTransform` is the generic nested-sphere engine
for an arbitrary continuous positive density on S^1 or S^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import DomainError
from ..geometry import (
    UniformFlag,
    frechet_median,
    normalize,
    orthogonal_unit,
    tangent_normal_compose,
    tangent_normal_decompose,
)
from ..numerics import (
    CHEB_NODES,
    ChebyshevCdf,
    CircleCdf,
    MonotoneCdf,
    ScalarChebyshevCdf,
    chebyshev_nodes,
    gauss_legendre,
    invert_cdf,
)
from .base import Transform

# ---------------------------------------------------------------------------
# Closed-form scalar maps
# ---------------------------------------------------------------------------


def fisher_u(t, kappa):
    """Uniformising map of ``t = x.mu`` for the Fisher law on S^2.

    Written as ``2 e^{kappa (t - 1)} expm1(-kappa (t + 1)) / expm1(-2 kappa) - 1``,
    which is algebraically the textbook ratio but cannot overflow. ``kappa``
    may be an array broadcasting against ``t``.
    """
    t = np.asarray(t, dtype=float)
    k = np.asarray(kappa, dtype=float)
    if np.any(k < 0):
        raise DomainError("kappa must be >= 0")
    if np.all(k == 0):
        return np.broadcast_to(t, np.broadcast_shapes(t.shape, k.shape)).copy()
    ks = np.where(k == 0, 1.0, k)
    u = 2 * np.exp(ks * (t - 1)) * np.expm1(-ks * (t + 1)) / np.expm1(-2 * ks) - 1
    return np.clip(np.where(k == 0, t, u), -1.0, 1.0)


def fisher_t(u, kappa: float):
    """Inverse of :func:`fisher_u`."""
    u = np.asarray(u, dtype=float)
    if kappa == 0:
        return u.copy()
    q = (u + 1) / 2
    with np.errstate(divide="ignore"):
        t = 1 + np.log1p((1 - q) * np.expm1(-2 * kappa)) / kappa
    return np.clip(t, -1.0, 1.0)


def fisher_u_approx(t, kappa: float):
    """Large-concentration approximation ``2 e^{kappa (t - 1)} - 1``."""
    if not kappa > 0:
        raise DomainError("the approximation needs kappa > 0")
    return 2 * np.exp(kappa * (np.asarray(t, dtype=float) - 1)) - 1


def fisher_t_approx(u, kappa: float):
    if not kappa > 0:
        raise DomainError("the approximation needs kappa > 0")
    with np.errstate(divide="ignore"):
        t = 1 + np.log((np.asarray(u, dtype=float) + 1) / 2) / kappa
    return np.clip(t, -1.0, 1.0)


def acg_u(t, ratio: float):
    """Uniformising map ``t / sqrt(ratio + (1 - ratio) t^2)`` of a two-eigenvalue ACG.

    ``ratio = a / b`` where ``a`` is the eigenvalue of ``A`` on the symmetry axis.
    The inverse map is ``acg_u(u, 1 / ratio)``.
    """
    if not ratio > 0:
        raise DomainError("eigenvalue ratio must be > 0")
    t = np.asarray(t, dtype=float)
    return t / np.sqrt(ratio + (1 - ratio) * t * t)


def acg_standard_map(A, x) -> np.ndarray:
    """The standard map ``x -> A^{-1/2} x / |A^{-1/2} x|`` to uniformity."""
    vals, vecs = np.linalg.eigh(np.asarray(A, dtype=float))
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
    return normalize(np.asarray(x, dtype=float) @ inv_sqrt.T)


def matrix_sqrt(A) -> np.ndarray:
    vals, vecs = np.linalg.eigh(np.asarray(A, dtype=float))
    return (vecs * np.sqrt(vals)) @ vecs.T


# ---------------------------------------------------------------------------
# Rotationally symmetric laws
# ---------------------------------------------------------------------------


def rotsym_map(x, mu, u, u_plus=None) -> np.ndarray:
    """Move each ``x`` along its meridian so its coordinate along ``mu`` becomes ``u``.

    The tangential direction ``(I - mu mu^T) x`` is kept. Poles go to poles.
    ``u_plus``, if given, is ``1 + u`` computed without cancellation and
    sets the tangential length near the antipode of ``mu``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    mu = np.asarray(mu, dtype=float)
    u = np.asarray(u, dtype=float)
    t = x @ mu
    tang = x - t[:, None] * mu
    norm = np.linalg.norm(tang, axis=1)
    pole = norm < 1e-15
    up = 1 + u if u_plus is None else np.asarray(u_plus, dtype=float)
    scale = np.sqrt(np.clip((1 - u) * up, 0.0, None)) / np.where(pole, 1.0, norm)
    out = u[:, None] * mu + scale[:, None] * tang
    out[pole] = np.sign(t[pole])[:, None] * mu
    return out


def one_plus_t(x, mu) -> np.ndarray:
    """``1 + x.mu``, from the tangential length where ``x.mu < 0``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.clip(x @ mu, -1.0, 1.0)
    s2 = np.sum((x - t[:, None] * mu) ** 2, axis=1)
    return np.where(t < 0, s2 / (1 - t), 1 + t)


def pit_rotsym(G_mu: MonotoneCdf, G_0: MonotoneCdf, mu, x) -> np.ndarray:
    """Rotationally symmetric transform from CDFs of ``t = x.mu``.

    ``u = G_0^{-1}(G_mu(t))`` replaces ``t``; both CDFs live on [-1, 1].
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.clip(x @ np.asarray(mu, dtype=float), -1.0, 1.0)
    u = np.atleast_1d(invert_cdf(G_0, G_mu(t)))
    return rotsym_map(x, mu, u)


def uniform_t_cdf(p: int) -> MonotoneCdf:
    """CDF of ``t = x.mu`` for ``x`` uniform on S^{p-1}."""
    from scipy import special

    if p == 3:
        return MonotoneCdf(lambda t: (np.asarray(t) + 1) / 2, upper=1.0, lower=-1.0)
    a = (p - 1) / 2
    return MonotoneCdf(lambda t: special.betainc(a, a, (np.asarray(t) + 1) / 2), upper=1.0, lower=-1.0)


@dataclass(frozen=True)
class RotSymTransform(Transform):
    """Transform determined by a monotone map ``t -> u`` and its inverse.

    ``plus_map`` and ``plus_inverse`` optionally give the same maps in the
    variables ``1 + t`` and ``1 + u``; they keep round trips accurate near
    the antipode of ``mu``, where ``u_of_t`` is very flat.
    """

    mu: np.ndarray
    u_of_t: Callable[[np.ndarray], np.ndarray]
    t_of_u: Callable[[np.ndarray], np.ndarray]
    space: str = "sphere"
    plus_map: Callable[[np.ndarray], np.ndarray] | None = None
    plus_inverse: Callable[[np.ndarray], np.ndarray] | None = None

    def _apply(self, x, f, f_plus):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.clip(x @ self.mu, -1, 1)
        if f_plus is None:
            return rotsym_map(x, self.mu, f(t))
        up = np.clip(f_plus(one_plus_t(x, self.mu)), 0.0, 2.0)
        return rotsym_map(x, self.mu, up - 1, up)

    def forward(self, x):
        return self._apply(x, self.u_of_t, self.plus_map)

    def inverse(self, y):
        return self._apply(y, self.t_of_u, self.plus_inverse)


def fisher_plus_u(w, kappa: float):
    """``1 + fisher_u(t)`` as a function of ``w = 1 + t``."""
    w = np.asarray(w, dtype=float)
    return 2 * np.exp(kappa * (w - 2)) * np.expm1(-kappa * w) / np.expm1(-2 * kappa)


def fisher_plus_t(w, kappa: float):
    """``1 + fisher_t(u)`` as a function of ``w = 1 + u``."""
    q = np.asarray(w, dtype=float) / 2
    if 2 * kappa < 700:
        return np.log1p(q * np.expm1(2 * kappa)) / kappa
    with np.errstate(divide="ignore"):
        return 2 + np.log(q + (1 - q) * np.exp(-2 * kappa)) / kappa


def fisher_transform(mu, kappa: float, approx: bool = False) -> RotSymTransform:
    """Closed-form transform of the Fisher law on S^2."""
    mu = normalize(mu)
    if mu.shape[-1] != 3:
        raise DomainError("the closed form is for S^2; use radial_rotsym_transform otherwise")
    if approx:
        return RotSymTransform(mu, lambda t: fisher_u_approx(t, kappa), lambda u: fisher_t_approx(u, kappa))
    return RotSymTransform(mu, lambda t: fisher_u(t, kappa), lambda u: fisher_t(u, kappa),
                           plus_map=lambda w: fisher_plus_u(w, kappa),
                           plus_inverse=lambda w: fisher_plus_t(w, kappa))


def radial_rotsym_transform(mu, radial_density: Callable[[np.ndarray], np.ndarray],
                            space: str = "sphere") -> RotSymTransform:
    """Rotationally symmetric transform on S^{p-1} from an unnormalised colatitude law.

    ``radial_density(r)`` is the density of the law with respect to the
    uniform one as a function of the colatitude ``r``; the colatitude
    densities ``f(r) sin^{p-2} r`` and ``sin^{p-2} r`` are integrated
    spectrally.
    """
    mu = normalize(mu)
    p = mu.shape[-1]
    src = ScalarChebyshevCdf(lambda r: radial_density(r) * np.sin(r) ** (p - 2), 0.0, np.pi)
    ref = ScalarChebyshevCdf(lambda r: np.sin(r) ** (p - 2), 0.0, np.pi)

    def u_of_t(t):
        return np.cos(ref.inverse(src(np.arccos(t))))

    def t_of_u(u):
        return np.cos(src.inverse(ref(np.arccos(u))))

    return RotSymTransform(mu, u_of_t, t_of_u, space)


def acg_transform(A) -> Transform:
    """Transform of the ACG law with shape matrix ``A`` on RP^{p-1}.

    For two distinct eigenvalues this is the rotationally symmetric closed
    form about the simple eigenvector; otherwise the standard map.
    """
    A = np.asarray(A, dtype=float)
    vals, vecs = np.linalg.eigh(A)
    p = len(vals)
    distinct = np.unique(np.round(vals / vals.max(), 10))
    if len(distinct) == 1:
        return RotSymTransform(vecs[:, -1], lambda t: t, lambda u: u, "projective")
    if len(distinct) == 2:
        rel = np.round(vals / vals.max(), 10)
        counts = {v: int(np.sum(rel == v)) for v in distinct}
        simple = [v for v in distinct if counts[v] == 1]
        if simple:
            # for p = 2 both eigenvalues are simple; take the larger as the axis
            j = int(np.nonzero(rel == max(simple))[0][0])
            a = vals[j]
            b = vals[np.nonzero(rel != rel[j])[0][0]]
            rho = a / b
            return RotSymTransform(vecs[:, j], lambda t: acg_u(t, rho), lambda u: acg_u(u, 1 / rho), "projective")
    return StandardAcgTransform(A)


@dataclass(frozen=True)
class StandardAcgTransform(Transform):
    A: np.ndarray
    space: str = "projective"

    def forward(self, x):
        return acg_standard_map(self.A, np.atleast_2d(x))

    def inverse(self, y):
        return normalize(np.atleast_2d(np.asarray(y, dtype=float)) @ matrix_sqrt(self.A).T)


# ---------------------------------------------------------------------------
# Generic nested-sphere engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NestedSphereChart:
    """Successive medians ``(m_{p-1}, ..., m_{s+1})`` of a law on S^{p-1}.

    For S^2 the second entry is a point of the great circle normal to the
    first; it anchors the angular transform.
    """

    p: int
    medians: tuple = ()

    @property
    def s(self) -> int:
        return self.p - 1 - len(self.medians)


def _colatitude_rule(n: int = 128):
    return gauss_legendre(n, 0.0, np.pi)


def _frame(m2, m1=None):
    e1 = orthogonal_unit(m2) if m1 is None else np.asarray(m1, dtype=float)
    return e1, np.cross(m2, e1)


def angular_marginal(density, m2, e1, e2, n: int = 128):
    """Density of the direction ``u`` (as an angle in the frame ``e1, e2``)."""
    r, w = _colatitude_rule(n)
    sw = w * np.sin(r)

    def g(alpha):
        alpha = np.asarray(alpha, dtype=float)
        u = np.cos(alpha)[:, None] * e1 + np.sin(alpha)[:, None] * e2
        pts = np.cos(r)[:, None, None] * m2 + np.sin(r)[:, None, None] * u[None]
        vals = np.asarray(density(pts.reshape(-1, 3)), dtype=float).reshape(len(r), len(alpha))
        return sw @ vals

    return g


def build_nested_chart(density, p: int, axial: bool = False) -> NestedSphereChart:
    """Median chain of a density on S^{p-1}, stopping at the first uniform level."""
    if p == 2:
        med = frechet_median(density=density, p=2, axial=axial)
        return NestedSphereChart(2, () if isinstance(med, UniformFlag) else (med,))
    if p != 3:
        raise DomainError("the generic engine supports S^1 and S^2")
    m2 = frechet_median(density=density, p=3, axial=axial)
    if isinstance(m2, UniformFlag):
        return NestedSphereChart(3, ())
    e1, e2 = _frame(m2)
    g = angular_marginal(density, m2, e1, e2)
    m1 = frechet_median(density=lambda q: g(np.arctan2(q[:, 1], q[:, 0])), p=2, axial=axial)
    if isinstance(m1, UniformFlag):
        return NestedSphereChart(3, (m2,))
    return NestedSphereChart(3, (m2, m1[0] * e1 + m1[1] * e2))


def _half_angle(F):
    """Colatitude with uniform-law CDF ``(1 - cos r) / 2 = F``."""
    F = np.clip(F, 0.0, 1.0)
    return 2 * np.arctan2(np.sqrt(F), np.sqrt(1 - F))


@dataclass(frozen=True)
class SphereDensityTransform(Transform):
    """Nested-sphere transform of a continuous positive density on S^1 or S^2.

    Parameters
    ----------
    density : callable
        Density with respect to the uniform law (normalisation irrelevant),
        evaluated on ``(n, p)`` arrays.
    p : int
        Ambient dimension, 2 or 3.
    axial : bool
        The density is invariant under ``x -> -x``.
    chart : NestedSphereChart, optional
        Supply a chart to skip the median search. For S^2 a second entry
        anchors the angular transform even if that marginal is uniform.
    """

    density: Callable
    p: int
    axial: bool = False
    chart: NestedSphereChart | None = None
    nodes: int = CHEB_NODES
    space: str = "sphere"
    _circle: CircleCdf | None = field(default=None, init=False, repr=False, compare=False)
    _frame: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        chart = self.chart or build_nested_chart(self.density, self.p, self.axial)
        object.__setattr__(self, "chart", chart)
        if self.p == 2:
            if chart.medians:
                m = chart.medians[0]
                dens = lambda a: self.density(np.stack([np.cos(a), np.sin(a)], axis=1))
                object.__setattr__(self, "_circle", CircleCdf(dens, np.arctan2(m[1], m[0])))
            return
        if self.p != 3:
            raise DomainError("the generic engine supports S^1 and S^2")
        if not chart.medians:
            return
        m2 = chart.medians[0]
        m1 = chart.medians[1] if len(chart.medians) > 1 else None
        e1, e2 = _frame(m2, m1)
        object.__setattr__(self, "_frame", (m2, e1, e2))
        if m1 is not None:
            g = angular_marginal(self.density, m2, e1, e2)
            object.__setattr__(self, "_circle", CircleCdf(g, 0.0))

    # -- helpers ---------------------------------------------------------
    def _ray_cdf(self, u):
        m2 = self._frame[0]
        r = chebyshev_nodes(0.0, np.pi, self.nodes)
        pts = np.cos(r)[:, None, None] * m2 + np.sin(r)[:, None, None] * u[None]
        vals = np.asarray(self.density(pts.reshape(-1, 3)), dtype=float).reshape(len(r), len(u))
        vals = vals * np.sin(r)[:, None]
        return ChebyshevCdf(vals, 0.0, np.pi)

    def _split(self, x):
        m2, e1, e2 = self._frame
        r, u, pole = tangent_normal_decompose(x, m2, on_pole="mask")
        alpha = np.arctan2(u @ e2, u @ e1)
        return r, alpha, pole

    def _join(self, r, alpha):
        m2, e1, e2 = self._frame
        u = np.cos(alpha)[:, None] * e1 + np.sin(alpha)[:, None] * e2
        return tangent_normal_compose(r, u, m2), u

    # -- maps ------------------------------------------------------------
    def forward(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if not self.chart.medians:
            return x.copy()
        if self.p == 2:
            theta = self._circle.transform(np.arctan2(x[:, 1], x[:, 0]))
            return np.stack([np.cos(theta), np.sin(theta)], axis=1)
        r, alpha, pole = self._split(x)
        _, u = self._join(np.zeros_like(r), alpha)
        F = self._ray_cdf(u)(r)
        alpha_new = self._circle.transform(alpha) if self._circle is not None else alpha
        out, _ = self._join(_half_angle(F), alpha_new)
        out[pole] = x[pole]
        return out

    def inverse(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if not self.chart.medians:
            return y.copy()
        if self.p == 2:
            theta = self._circle.untransform(np.arctan2(y[:, 1], y[:, 0]))
            return np.stack([np.cos(theta), np.sin(theta)], axis=1)
        r_new, alpha_new, pole = self._split(y)
        alpha = self._circle.untransform(alpha_new) if self._circle is not None else alpha_new
        _, u = self._join(np.zeros_like(r_new), alpha)
        F = np.sin(r_new / 2) ** 2
        r = self._ray_cdf(u).inverse(F)
        out, _ = self._join(r, alpha)
        out[pole] = y[pole]
        return out


def pit_sphere(transform: SphereDensityTransform, x) -> np.ndarray:
    return transform.forward(x)
