"""Exponential and log maps, distances and Frechet medians.

Conventions
-----------
* Sphere points are rows of a ``(n, p)`` array with unit Euclidean norm.
* Shape points are unit complex ``(k - 1)``-vectors (Helmertized pre-shapes)
  whose first nonzero entry is real and positive.
* Simplex points are rows with positive entries summing to one.
* Half-plane points are ``(x1, x2)`` rows with ``x2 > 0``.
* Face indices of the simplex are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import AmbiguousMedian, DomainError, PoleError, RangeError
from .numerics import gauss_legendre

POLE_TOL = 1e-12


# ---------------------------------------------------------------------------
# Spheres
# ---------------------------------------------------------------------------

def normalize(x, axis: int = -1) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=axis, keepdims=True)


def as_unit_vectors(x, tol: float = 1e-12) -> np.ndarray:
    """Validate an array of unit vectors (last axis is the ambient one)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise DomainError("unit vectors need p >= 2")
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > tol):
        raise DomainError("points are not unit vectors")
    return x


def tangent_normal_decompose(x, m, on_pole: str = "raise"):
    """Split ``x = cos(r) m + sin(r) u`` with ``u`` orthogonal to ``m``.

    Parameters
    ----------
    x : array_like, shape (..., p)
    m : array_like, shape (p,)
    on_pole : {"raise", "mask"}
        With ``"mask"`` the function returns a third output flagging rows
        where ``|x.m| > 1 - 1e-12``; their ``u`` is an arbitrary unit vector
        orthogonal to ``m``.

    Returns
    -------
    r : ndarray, colatitude in [0, pi]
    u : ndarray, unit tangent directions
    """
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    t = np.clip(x @ m, -1.0, 1.0)
    tang = x - t[..., None] * m
    norm = np.linalg.norm(tang, axis=-1)
    pole = np.abs(t) > 1 - POLE_TOL
    if np.any(pole) and on_pole == "raise":
        raise PoleError("point coincides with the pole or its antipode")
    r = np.arctan2(norm, t)
    safe = np.where(pole, 1.0, norm)
    u = tang / safe[..., None]
    if np.any(pole):
        u = np.where(pole[..., None], orthogonal_unit(m), u)
    if on_pole == "mask":
        return r, u, pole
    return r, u


def tangent_normal_compose(r, u, m) -> np.ndarray:
    """Inverse of :func:`tangent_normal_decompose`."""
    r = np.asarray(r, dtype=float)
    return np.cos(r)[..., None] * np.asarray(m, dtype=float) + np.sin(r)[..., None] * np.asarray(u, dtype=float)


def orthogonal_unit(m) -> np.ndarray:
    """A fixed unit vector orthogonal to ``m``."""
    m = np.asarray(m, dtype=float)
    e = np.zeros_like(m)
    e[np.argmin(np.abs(m))] = 1.0
    v = e - (e @ m) * m
    return v / np.linalg.norm(v)


def orthonormal_complement(frame) -> np.ndarray:
    """Orthonormal basis (rows) of the complement of the rows of ``frame``."""
    frame = np.atleast_2d(np.asarray(frame, dtype=float))
    p = frame.shape[1]
    q, _ = np.linalg.qr(np.concatenate([frame.T, np.eye(p)], axis=1))
    basis = q[:, frame.shape[0]:p].T
    return basis


def sphere_exp(m, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    return tangent_normal_compose(r, v / safe[..., None], m)


def sphere_log(m, x) -> np.ndarray:
    r, u, _ = tangent_normal_decompose(x, m, on_pole="mask")
    return r[..., None] * u


def sphere_distance(x, y) -> np.ndarray:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    cross = np.linalg.norm(x - y, axis=-1)
    add = np.linalg.norm(x + y, axis=-1)
    return 2 * np.arctan2(cross, add)


def torus_cut_radius(u):
    """Cut-locus radius ``pi / max(|cos u|, |sin u|)`` of the flat torus."""
    u = np.asarray(u, dtype=float)
    return np.pi / np.maximum(np.abs(np.cos(u)), np.abs(np.sin(u)))


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------

def as_rotation(matrix, tol: float = 1e-10) -> np.ndarray:
    X = np.asarray(matrix, dtype=float)
    if X.shape[-2:] != (3, 3):
        raise DomainError("rotations are 3x3 matrices")
    eye = np.broadcast_to(np.eye(3), X.shape)
    if np.any(np.abs(np.swapaxes(X, -1, -2) @ X - eye) > tol) or np.any(np.abs(np.linalg.det(X) - 1) > tol):
        raise DomainError("matrix is not in SO(3)")
    return X


def axis_angle(R):
    """Rotation axis (unit) and angle in [0, pi] of rotation matrices."""
    from scipy.spatial.transform import Rotation

    rv = Rotation.from_matrix(np.asarray(R, dtype=float)).as_rotvec()
    angle = np.linalg.norm(rv, axis=-1)
    safe = np.where(angle > 0, angle, 1.0)
    axis = rv / safe[..., None]
    axis = np.where((angle > 0)[..., None], axis, np.array([0.0, 0.0, 1.0]))
    return axis, angle


def from_axis_angle(axis, angle) -> np.ndarray:
    from scipy.spatial.transform import Rotation

    rv = np.asarray(axis, dtype=float) * np.asarray(angle, dtype=float)[..., None]
    return Rotation.from_rotvec(rv).as_matrix()


# ---------------------------------------------------------------------------
# Poincare half-plane (disk model used for exp/log)
# ---------------------------------------------------------------------------

def _as_complex(z):
    z = np.asarray(z, dtype=float)
    return z[..., 0] + 1j * z[..., 1]


def _as_pairs(z):
    return np.stack([z.real, z.imag], axis=-1)


def halfplane_exp(m, v) -> np.ndarray:
    """Exponential map of H^2 at ``m`` applied to tangent vectors ``v``.

    Tangent vectors are in coordinate components, so their Riemannian norm
    is ``|v| / m2``.
    """
    m = np.asarray(m, dtype=float)
    a, b = m[..., 0], m[..., 1]
    if np.any(b <= 0):
        raise DomainError("half-plane points need x2 > 0")
    w = _as_complex(v) / b
    s = np.abs(w)
    safe = np.where(s > 0, s, 1.0)
    omega = -1j * np.tanh(s / 2) * w / safe
    zp = 1j * (1 + omega) / (1 - omega)
    return _as_pairs(a + b * zp)


def halfplane_log(m, x) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    a, b = m[..., 0], m[..., 1]
    zp = (_as_complex(x) - a) / b
    if np.any(zp.imag <= 0):
        raise DomainError("half-plane points need x2 > 0")
    omega = (zp - 1j) / (zp + 1j)
    mod = np.abs(omega)
    s = 2 * np.arctanh(mod)
    safe = np.where(mod > 0, mod, 1.0)
    w = s * 1j * omega / safe
    return _as_pairs(b * w)


def halfplane_distance(x, y) -> np.ndarray:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    num = np.sum((x - y) ** 2, axis=-1)
    return np.arccosh(1 + num / (2 * x[..., 1] * y[..., 1]))


# ---------------------------------------------------------------------------
# Simplex
# ---------------------------------------------------------------------------

def as_simplex(y, tol: float = 1e-12) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(np.abs(y.sum(axis=-1) - 1) > tol):
        raise DomainError("simplex points need positive entries summing to one")
    return y


def simplex_max_radius(u):
    """Largest ``r`` with ``c + r u`` in the closed simplex.

    This is ``1 / (p max_j(-u_j))``. It is never smaller than the bound
    ``1 / (p max_j |u_j|)``, and equals it whenever the most negative entry
    has the largest modulus.
    """
    u = np.asarray(u, dtype=float)
    p = u.shape[-1]
    return 1.0 / (p * np.max(-u, axis=-1))


def simplex_exp(r, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(u.sum(axis=-1)) > 1e-10) or np.any(np.abs(np.linalg.norm(u, axis=-1) - 1) > 1e-10):
        raise DomainError("direction must be a zero-sum unit vector")
    if np.any(r < 0) or np.any(r >= simplex_max_radius(u)):
        raise RangeError("radius outside [0, max radius)")
    p = u.shape[-1]
    return 1.0 / p + r[..., None] * u


def simplex_log(y):
    """Radius and zero-sum unit direction of ``y - c``; direction is NaN at c."""
    y = np.asarray(y, dtype=float)
    d = y - 1.0 / y.shape[-1]
    r = np.linalg.norm(d, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = d / r[..., None]
    return r, u


def barycentric_ratio(y, q):
    """``min_j y_j / q_j`` and its argmin for interior centre ``q``."""
    ratio = np.asarray(y, dtype=float) / np.asarray(q, dtype=float)
    face = np.argmin(ratio, axis=-1)
    return np.take_along_axis(ratio, face[..., None], axis=-1)[..., 0], face


@dataclass(frozen=True)
class RadialProjection:
    r: np.ndarray
    face: np.ndarray
    z: np.ndarray
    at_centre: np.ndarray


def radial_projection(y, centre=None) -> RadialProjection:
    """Project ``y`` from ``centre`` onto the boundary of the simplex.

    ``y = (1 - r) centre + r z`` with ``z`` on the face ``z_face = 0``. For the
    centroid this gives ``r = 1 - p min_j y_j`` and
    ``z_j = (y_j - min y) / r``. At the centre ``r = 0``, ``face = -1`` and
    ``z`` is NaN.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    p = y.shape[-1]
    q = np.full(p, 1.0 / p) if centre is None else np.asarray(centre, dtype=float)
    lam, face = barycentric_ratio(y, q)
    r = 1.0 - lam
    at_centre = r <= 1e-15
    safe = np.where(at_centre, 1.0, r)
    z = (y - lam[:, None] * q) / safe[:, None]
    np.put_along_axis(z, face[:, None], 0.0, axis=-1)
    z = np.where(at_centre[:, None], np.nan, z)
    face = np.where(at_centre, -1, face)
    r = np.where(at_centre, 0.0, r)
    return RadialProjection(r=r, face=face, z=z, at_centre=at_centre)


# ---------------------------------------------------------------------------
# Planar shapes
# ---------------------------------------------------------------------------

def helmert_submatrix(k: int) -> np.ndarray:
    """Rows 2..k of the Helmert matrix, shape ``(k - 1, k)``."""
    H = np.zeros((k - 1, k))
    for j in range(1, k):
        H[j - 1, :j] = -1.0 / np.sqrt(j * (j + 1))
        H[j - 1, j] = j / np.sqrt(j * (j + 1))
    return H


def canonical_phase(z) -> np.ndarray:
    """Rotate each complex row so its first nonzero entry is real positive."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    nz = np.abs(z) > 1e-300
    first = np.argmax(nz, axis=-1)
    lead = np.take_along_axis(z, first[:, None], axis=-1)
    phase = np.where(np.abs(lead) > 0, lead / np.where(np.abs(lead) > 0, np.abs(lead), 1.0), 1.0)
    out = z * np.conj(phase)
    lead_idx = first[:, None]
    np.put_along_axis(out, lead_idx, np.abs(np.take_along_axis(out, lead_idx, axis=-1)), axis=-1)
    return out


def landmarks_to_shape(landmarks) -> np.ndarray:
    """Planar landmarks ``(n, k)`` complex (or ``(n, k, 2)`` real) to shape points."""
    L = np.asarray(landmarks)
    if L.dtype.kind != "c":
        L = L[..., 0] + 1j * L[..., 1]
    L = np.atleast_2d(L)
    k = L.shape[-1]
    if k < 3:
        raise DomainError("shapes need k >= 3 landmarks")
    z = L @ helmert_submatrix(k).T
    norm = np.linalg.norm(z, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DomainError("degenerate landmark configuration")
    return canonical_phase(z / norm)


def shape_distance(z1, z2):
    """Riemannian distance ``arccos |<z1, z2>|`` on CP^{k-2}."""
    z1, z2 = np.asarray(z1, dtype=complex), np.asarray(z2, dtype=complex)
    ip = np.sum(np.conj(z1) * z2, axis=-1)
    n1 = np.sum(np.abs(z1) ** 2, axis=-1)
    # component of z2 orthogonal to z1; avoids cancellation for nearby shapes
    resid = z2 - (ip / n1)[..., None] * z1
    cross = np.sqrt(n1) * np.linalg.norm(resid, axis=-1)
    return np.arctan2(cross, np.abs(ip))


def shape_to_real(z) -> np.ndarray:
    """Interleave real and imaginary parts: re1, im1, re2, im2, ..."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    return np.stack([z.real, z.imag], axis=-1).reshape(z.shape[0], -1)


def real_to_shape(x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] % 2:
        raise DomainError("shape rows need an even number of columns")
    return x[:, 0::2] + 1j * x[:, 1::2]


# ---------------------------------------------------------------------------
# Frechet medians
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformFlag:
    """Returned by :func:`frechet_median` when the input looks uniform."""

    statistic: float
    p_value: float


UNIFORM_LEVEL = 1e-3
UNIFORM_N = 10_000


def _align_axial(x, m):
    s = np.sign(x @ m)
    s[s == 0] = 1.0
    return x * s[:, None]


def _weiszfeld_points(x, w, axial, start, maxiter=200, tol=1e-10):
    m = start
    for _ in range(maxiter):
        xs = _align_axial(x, m) if axial else x
        v = sphere_log(m, xs)
        d = np.linalg.norm(v, axis=1)
        keep = d > 1e-14
        if not np.any(keep):
            return m, True
        wk = w[keep] / d[keep]
        grad = (wk[:, None] * v[keep]).sum(0) / w.sum()
        step = (wk[:, None] * v[keep]).sum(0) / wk.sum()
        if np.linalg.norm(grad) < tol:
            return m, True
        m = normalize(sphere_exp(m, step))
    return m, False


def _mean_start(x, w, axial):
    if axial:
        T = (w[:, None, None] * x[:, :, None] * x[:, None, :]).sum(0) / w.sum()
        vals, vecs = np.linalg.eigh(T)
        gap = vals[-1] - vals[-2]
        return vecs[:, -1], gap
    mean = (w[:, None] * x).sum(0) / w.sum()
    return mean / max(np.linalg.norm(mean), 1e-300), np.linalg.norm(mean)


def _uniformity_check(x, w, axial) -> UniformFlag:
    """Weighted multi-harmonic uniformity test with a nominal n of 10^4.

    A Frechet median makes the first moment of the next-level direction
    marginal vanish, so the plain Rayleigh statistic is blind exactly where
    the check is needed. On S^1 the Rayleigh statistic is applied to the
    harmonics 1..4 jointly; on higher spheres the Rayleigh and scatter
    (second-harmonic) statistics are added.
    """
    p = x.shape[1]
    wn = w / w.sum()
    if p == 2:
        theta = np.arctan2(x[:, 1], x[:, 0])
        j = np.arange(1, 5)
        c = (wn[:, None] * np.cos(np.outer(theta, j))).sum(0)
        s = (wn[:, None] * np.sin(np.outer(theta, j))).sum(0)
        stat = 2 * UNIFORM_N * float((c**2 + s**2).sum())
        df = 8
    else:
        mean = (wn[:, None] * x).sum(0)
        T = (wn[:, None, None] * x[:, :, None] * x[:, None, :]).sum(0)
        stat = UNIFORM_N * (p * mean @ mean + p * (p + 2) / 2 * (np.trace(T @ T) - 1.0 / p))
        df = p + (p - 1) * (p + 2) // 2
    return UniformFlag(statistic=float(stat), p_value=float(stats.chi2.sf(stat, df)))


def sphere_quadrature(m, nr: int = 128, nphi: int = 128):
    """Product rule on S^2 in polar coordinates about ``m`` (exact for constants).

    Returns points, weights (summing to 4 pi), colatitudes and directions.
    """
    m = np.asarray(m, dtype=float)
    r, wr = gauss_legendre(nr, 0.0, np.pi)
    phi = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi
    e1 = orthogonal_unit(m)
    e2 = np.cross(m, e1)
    dirs = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
    R, D = np.meshgrid(np.arange(nr), np.arange(nphi), indexing="ij")
    rr = r[R].ravel()
    uu = dirs[D].reshape(-1, 3)
    pts = tangent_normal_compose(rr, uu, m)
    w = (wr[R] * np.sin(r[R])).ravel() * (2 * np.pi / nphi)
    return pts, w, rr, uu


def circle_quadrature(n: int = 4096):
    theta = 2 * np.pi * (np.arange(n) + 0.5) / n
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return pts, np.full(n, 2 * np.pi / n), theta


def _circle_median(density, axial):
    """Median of a density on S^1 by balancing the masses of the two half circles."""
    pts, w, theta = circle_quadrature()
    f = np.asarray(density(pts), dtype=float) * w
    n = len(theta)
    half = n // 2
    cum = np.concatenate([[0.0], np.cumsum(np.concatenate([f, f]))])
    # ahead(i) = mass of the open half circle counterclockwise from theta_i
    ahead = cum[np.arange(n) + half] - cum[np.arange(n) + 1] + 0.5 * f[(np.arange(n) + half) % n]
    behind = f.sum() - f - ahead
    g = ahead - behind
    # d/dtheta E d(m, X) = -g, so minima sit where g changes from + to -
    cand = np.nonzero((g >= 0) & (np.roll(g, -1) < 0))[0]
    if len(cand) == 0:
        raise AmbiguousMedian("no median candidate on the circle")
    best, best_val, vals = None, np.inf, []
    for i in cand:
        j = (i + 1) % n
        a, b = g[i], g[j]
        t0 = theta[i] + (2 * np.pi / n) * (-a / (b - a) if b != a else 0.5)
        m = np.array([np.cos(t0), np.sin(t0)])
        obj = float((sphere_distance(pts, m) * f).sum())
        vals.append(obj)
        if obj < best_val:
            best, best_val = m, obj
    vals = sorted(vals)
    if len(vals) > 1 and vals[1] - vals[0] < 1e-6 * max(1.0, abs(vals[0])) and not axial:
        raise AmbiguousMedian("near-tied median candidates on the circle")
    return best


def frechet_median(points=None, weights=None, *, density=None, p: int | None = None,
                   axial: bool = False, start=None, check_uniform: bool = True):
    """Geodesic Frechet median of a sample or of a density on S^{p-1}.

    Parameters
    ----------
    points : array_like, shape (n, p), optional
        Sample points. Exactly one of ``points`` and ``density`` is given.
    weights : array_like, optional
        Nonnegative point weights.
    density : callable, optional
        Density with respect to the uniform measure, evaluated on an
        ``(n, p)`` array. Supported for ``p`` in {2, 3}.
    axial : bool
        Treat ``x`` and ``-x`` as the same point; the median is returned as
        one representative of its axis.
    check_uniform : bool
        For densities, return :class:`UniformFlag` when a multi-harmonic
        Rayleigh-type test at level 1e-3 with n = 10^4 does not reject.

    Raises
    ------
    AmbiguousMedian
        When the starting resultant is below 1e-6 or Weiszfeld iteration
        fails to settle in 200 steps.
    """
    if (points is None) == (density is None):
        raise ValueError("give exactly one of points and density")
    if points is not None:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        w = np.ones(len(x)) if weights is None else np.asarray(weights, dtype=float)
        m0, res = _mean_start(x, w, axial) if start is None else (normalize(start), 1.0)
        if res < 1e-6:
            raise AmbiguousMedian("sample resultant is numerically zero")
        m, ok = _weiszfeld_points(x, w, axial, m0)
        if not ok:
            raise AmbiguousMedian("Weiszfeld iteration did not converge")
        return m

    if p == 2:
        pts, w, _ = circle_quadrature()
        f = np.asarray(density(pts), dtype=float) * w
        if check_uniform:
            flag = _uniformity_check(pts, f, axial)
            if flag.p_value > UNIFORM_LEVEL:
                return flag
        if axial:
            # Work on the doubled angle, where the axial law is an ordinary one.
            def doubled(q):
                half = np.arctan2(q[:, 1], q[:, 0]) / 2
                return density(np.stack([np.cos(half), np.sin(half)], axis=1))

            m2 = _circle_median(doubled, False)
            half = np.arctan2(m2[1], m2[0]) / 2
            return np.array([np.cos(half), np.sin(half)])
        return _circle_median(density, False)
    if p != 3:
        raise DomainError("density medians are implemented for p in {2, 3}")

    # Start from the extrinsic mean (or principal axis) of a fixed grid.
    pts, w, _, _ = sphere_quadrature(np.array([0.0, 0.0, 1.0]))
    f = np.asarray(density(pts), dtype=float) * w
    if check_uniform:
        flag = _uniformity_check(pts, f, axial)
        if flag.p_value > UNIFORM_LEVEL:
            return flag
    m, res = _mean_start(pts, f, axial) if start is None else (normalize(start), 1.0)
    if res < 1e-6:
        raise AmbiguousMedian("density resultant is numerically zero")
    for _ in range(200):
        q, wq, rr, uu = sphere_quadrature(m)
        fq = np.asarray(density(q), dtype=float) * wq
        if axial:
            # fold the far hemisphere onto the near one
            fq = fq + np.asarray(density(-q), dtype=float) * wq
            keep = rr <= np.pi / 2
            fq, rr, uu = fq[keep], rr[keep], uu[keep]
        wk = fq / rr
        grad = (fq[:, None] * uu).sum(0) / fq.sum()
        if np.linalg.norm(grad) < 1e-10:
            return m
        step = (fq[:, None] * uu).sum(0) / wk.sum()
        m = normalize(sphere_exp(m, step))
    raise AmbiguousMedian("Weiszfeld iteration did not converge")
