"""Transforms of the open simplex onto its uniform law.

:class:`SimplexRadialTransform` uses radial projection onto the boundary and
recurses over faces; :class:`SimplexExpTransform` uses the exponential map
at the centroid.

Radial projection from the centroid cannot move mass between the cones
over different faces, so a literal face-by-face construction only works
for laws that give every cone mass ``1/p``. The radial transform therefore
projects the source from a *balanced centre* ``q`` whose cones all carry
mass ``1/p`` and projects the target from the centroid. For the uniform law
``q`` is the centroid and the map is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from ..errors import AmbiguousMedian, DomainError, NonConvergence
from ..geometry import UniformFlag, frechet_median, orthonormal_complement, radial_projection
from ..numerics import ChebyshevCdf, ScalarChebyshevCdf, chebyshev_nodes, gauss_legendre
from .base import Transform


def simplex_rule(p: int, n: int):
    """Collapsed Gauss-Legendre rule on Delta_{p-1}.

    Returns barycentric points ``(N, p)`` and weights summing to one
    (integration against the uniform probability law).
    """
    if p == 1:
        return np.ones((1, 1)), np.ones(1)
    sub, wsub = simplex_rule(p - 1, n)
    a, wa = gauss_legendre(n, 0.0, 1.0)
    wa = wa * a ** (p - 2)
    pts = np.empty((n, len(sub), p))
    pts[:, :, 0] = (1 - a)[:, None]
    pts[:, :, 1:] = a[:, None, None] * sub[None]
    w = np.outer(wa, wsub).ravel()
    return pts.reshape(-1, p), w / w.sum()


def _insert_zero(z, i):
    return np.insert(np.asarray(z, dtype=float), i, 0.0, axis=-1)


def is_uniform_density(density, p: int, tol: float = 1e-12) -> bool:
    pts, _ = simplex_rule(p, 6)
    vals = np.asarray(density(pts), dtype=float)
    return bool(np.ptp(vals) <= tol * np.max(np.abs(vals)))


def cone_masses(density, q, p: int, n_face: int = 24, n_s: int = 32) -> np.ndarray:
    """Probabilities of the cones from ``q`` over each face (normalised)."""
    d = p - 1
    s, ws = gauss_legendre(n_s, 0.0, 1.0)
    ws = ws * s ** (d - 1)
    fpts, fw = simplex_rule(p - 1, n_face)
    out = np.empty(p)
    for i in range(p):
        Z = _insert_zero(fpts, i)
        Y = (1 - s)[:, None, None] * q + s[:, None, None] * Z[None]
        vals = np.asarray(density(Y.reshape(-1, p)), dtype=float).reshape(n_s, -1)
        out[i] = q[i] * (ws @ vals @ fw)
    return out / out.sum()


def balanced_centre(density, p: int, tol: float = 1e-11) -> np.ndarray:
    """Interior point whose face cones all carry probability ``1/p``."""

    def q_of(theta):
        z = np.append(theta, 0.0)
        e = np.exp(z - z.max())
        return e / e.sum()

    def resid(theta):
        return cone_masses(density, q_of(theta), p)[:-1] - 1.0 / p

    sol = optimize.root(resid, np.zeros(p - 1), method="hybr", options={"xtol": 1e-14})
    q = q_of(sol.x)
    if np.max(np.abs(cone_masses(density, q, p) - 1.0 / p)) > tol:
        raise NonConvergence("balanced centre not found")
    return q


@dataclass(frozen=True)
class SimplexRadialTransform(Transform):
    """Radial-projection transform of a positive density on Delta_{p-1}.

    Parameters
    ----------
    density : callable
        Density on ``(n, p)`` arrays of simplex points (any normalisation).
    p : int
        Number of components, ``p >= 2``.
    nodes : int
        Chebyshev nodes per radial conditional CDF.
    """

    density: Callable
    p: int
    nodes: int = 129
    n_s: int = 32
    space: str = "simplex"
    uniform: bool = field(default=False, init=False)
    centre: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)
    _faces: tuple = field(default=(), init=False, repr=False, compare=False)
    _segment: ScalarChebyshevCdf | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.p < 2:
            raise DomainError("simplex needs p >= 2")
        if is_uniform_density(self.density, self.p):
            object.__setattr__(self, "uniform", True)
            return
        if self.p == 2:
            seg = ScalarChebyshevCdf(lambda t: self.density(np.stack([t, 1 - t], axis=1)), 0.0, 1.0, self.nodes)
            object.__setattr__(self, "_segment", seg)
            return
        q = balanced_centre(self.density, self.p)
        object.__setattr__(self, "centre", q)
        faces = tuple(SimplexRadialTransform(self._face_density(i), self.p - 1, self.nodes, self.n_s)
                      for i in range(self.p))
        object.__setattr__(self, "_faces", faces)

    def _face_density(self, i):
        d = self.p - 1
        s, ws = gauss_legendre(self.n_s, 0.0, 1.0)
        ws = ws * s ** (d - 1)
        q, p, f = self.centre, self.p, self.density

        def g(z):
            Z = _insert_zero(z, i)
            Y = (1 - s)[:, None, None] * q + s[:, None, None] * Z[None]
            return ws @ np.asarray(f(Y.reshape(-1, p)), dtype=float).reshape(len(s), -1)

        return g

    def _ray_cdf(self, z):
        d = self.p - 1
        s = chebyshev_nodes(0.0, 1.0, self.nodes)
        Y = np.maximum((1 - s)[:, None, None] * self.centre + s[:, None, None] * z[None], 0.0)
        vals = np.asarray(self.density(Y.reshape(-1, self.p)), dtype=float).reshape(len(s), len(z))
        return ChebyshevCdf(vals * (s ** (d - 1))[:, None], 0.0, 1.0)

    def forward(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.uniform:
            return y.copy()
        if self.p == 2:
            t = self._segment(y[:, 0])
            return np.stack([t, 1 - t], axis=1)
        d = self.p - 1
        proj = radial_projection(y, self.centre)
        c = np.full(self.p, 1.0 / self.p)
        out = np.tile(c, (len(y), 1))
        for i in range(self.p):
            rows = np.nonzero(proj.face == i)[0]
            if len(rows) == 0:
                continue
            z = proj.z[rows]
            F = self._ray_cdf(z)(proj.r[rows])
            r_new = F ** (1.0 / d)
            z_new = _insert_zero(self._faces[i].forward(np.delete(z, i, axis=1)), i)
            out[rows] = (1 - r_new)[:, None] * c + r_new[:, None] * z_new
        return out

    def inverse(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.uniform:
            return y.copy()
        if self.p == 2:
            t = self._segment.inverse(y[:, 0])
            return np.stack([t, 1 - t], axis=1)
        d = self.p - 1
        proj = radial_projection(y)
        out = np.tile(self.centre, (len(y), 1))
        for i in range(self.p):
            rows = np.nonzero(proj.face == i)[0]
            if len(rows) == 0:
                continue
            z = _insert_zero(self._faces[i].inverse(np.delete(proj.z[rows], i, axis=1)), i)
            r = self._ray_cdf(z).inverse(proj.r[rows] ** d)
            out[rows] = (1 - r)[:, None] * self.centre + r[:, None] * z
        return out


def pit_simplex_radial(density, y, p: int | None = None):
    y = np.atleast_2d(y)
    return SimplexRadialTransform(density, p or y.shape[1]).forward(y)


# ---------------------------------------------------------------------------
# Exponential-map transform (p = 3)
# ---------------------------------------------------------------------------


class SectorCircleCdf:
    """CDF on the circle of a density that is smooth between given breakpoints."""

    def __init__(self, density: Callable[[np.ndarray], np.ndarray], breaks, anchor: float, nodes: int = 129):
        b = np.sort(np.mod(np.asarray(breaks, dtype=float), 2 * np.pi))
        self.breaks = np.append(b, b[0] + 2 * np.pi)
        self.pieces = [ScalarChebyshevCdf(density, lo, hi, nodes) for lo, hi in zip(self.breaks[:-1], self.breaks[1:])]
        mass = np.array([pc.mass for pc in self.pieces])
        self.weights = mass / mass.sum()
        self.cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        self.anchor = float(anchor)
        self._h_anchor = float(self._h(np.array([anchor]))[0])

    def _h(self, theta):
        """Mass from the first breakpoint counterclockwise to ``theta``."""
        rel = np.mod(np.asarray(theta, dtype=float) - self.breaks[0], 2 * np.pi) + self.breaks[0]
        idx = np.clip(np.searchsorted(self.breaks, rel, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(rel)
        for j, pc in enumerate(self.pieces):
            sel = idx == j
            if np.any(sel):
                out[sel] = self.cum[j] + self.weights[j] * pc(rel[sel])
        return out

    def __call__(self, theta):
        return np.mod(self._h(theta) - self._h_anchor, 1.0)

    def inverse(self, q):
        h = np.mod(np.asarray(q, dtype=float) + self._h_anchor, 1.0)
        idx = np.clip(np.searchsorted(self.cum, h, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(h)
        for j, pc in enumerate(self.pieces):
            sel = idx == j
            if np.any(sel):
                local = np.clip((h[sel] - self.cum[j]) / self.weights[j], 0.0, 1.0)
                out[sel] = pc.inverse(local)
        return out


@dataclass(frozen=True)
class SimplexExpTransform(Transform):
    """Exponential-map transform at the centroid, for compositions with p = 3.

    A direction ``u`` is sent to ``psi(u)``, where ``psi`` matches the
    direction marginals of the source and of the uniform law (both measured
    from the median direction of the source), and the radius is matched
    through the conditional radial CDFs.
    """

    density: Callable
    p: int = 3
    nodes: int = 129
    space: str = "simplex"
    uniform: bool = field(default=False, init=False)
    basis: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)
    _src: SectorCircleCdf | None = field(default=None, init=False, repr=False, compare=False)
    _ref: SectorCircleCdf | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.p != 3:
            raise DomainError("the exponential-map transform is implemented for p = 3")
        if is_uniform_density(self.density, self.p):
            object.__setattr__(self, "uniform", True)
            return
        B = orthonormal_complement(np.ones((1, 3)) / np.sqrt(3))
        object.__setattr__(self, "basis", B)
        verts = np.eye(3) - 1.0 / 3
        breaks = np.arctan2(verts @ B[1], verts @ B[0])
        r, w = gauss_legendre(64, 0.0, 1.0)

        def g_src(alpha):
            u = self._direction(alpha)
            R = self.max_radius(u)
            rr = r[:, None] * R[None]
            Y = 1.0 / 3 + rr[:, :, None] * u[None]
            vals = np.asarray(self.density(Y.reshape(-1, 3)), dtype=float).reshape(rr.shape)
            return (w[:, None] * vals * rr).sum(0) * R

        def g_ref(alpha):
            return self.max_radius(self._direction(alpha)) ** 2 / 2

        med = None
        try:
            med = frechet_median(density=lambda x: g_src(np.arctan2(x[:, 1], x[:, 0])), p=2)
        except AmbiguousMedian:
            pass
        anchor = 0.0 if med is None or isinstance(med, UniformFlag) else float(np.arctan2(med[1], med[0]))
        object.__setattr__(self, "_src", SectorCircleCdf(g_src, breaks, anchor, self.nodes))
        object.__setattr__(self, "_ref", SectorCircleCdf(g_ref, breaks, anchor, self.nodes))

    def _direction(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        return np.cos(alpha)[:, None] * self.basis[0] + np.sin(alpha)[:, None] * self.basis[1]

    @staticmethod
    def max_radius(u):
        return 1.0 / (u.shape[-1] * np.max(-u, axis=-1))

    def _polar(self, y):
        d = y - 1.0 / 3
        return np.linalg.norm(d, axis=1), np.arctan2(d @ self.basis[1], d @ self.basis[0])

    def _ray_cdf(self, u):
        R = self.max_radius(u)
        s = chebyshev_nodes(0.0, 1.0, self.nodes)
        rr = s[:, None] * R[None]
        Y = np.maximum(1.0 / 3 + rr[:, :, None] * u[None], 0.0)
        vals = np.asarray(self.density(Y.reshape(-1, 3)), dtype=float).reshape(rr.shape) * rr
        return ChebyshevCdf(vals, 0.0, R), R

    def forward(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.uniform:
            return y.copy()
        r, alpha = self._polar(y)
        cdf, _ = self._ray_cdf(self._direction(alpha))
        F = cdf(r)
        alpha_new = self._ref.inverse(self._src(alpha))
        u_new = self._direction(alpha_new)
        r_new = self.max_radius(u_new) * np.sqrt(F)
        out = 1.0 / 3 + r_new[:, None] * u_new
        out[r == 0] = 1.0 / 3
        return out

    def inverse(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if self.uniform:
            return y.copy()
        r_new, alpha_new = self._polar(y)
        u_new = self._direction(alpha_new)
        F = (r_new / self.max_radius(u_new)) ** 2
        alpha = self._src.inverse(self._ref(alpha_new))
        u = self._direction(alpha)
        cdf, _ = self._ray_cdf(u)
        r = cdf.inverse(F)
        out = 1.0 / 3 + r[:, None] * u
        out[r_new == 0] = 1.0 / 3
        return out
