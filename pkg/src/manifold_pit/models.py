"""Densities, exact samplers and estimators for the supported families.

Densities are with respect to the uniform law of the space unless stated
otherwise. Samplers take ``(model, n, seed)`` and are deterministic in the
seed. Estimators accept a single sample ``(n, ...)`` or a batch
``(B, n, ...)`` and return :class:`FitResult` objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .errors import DomainError, NonConvergence
from .geometry import (
    as_rotation,
    canonical_phase,
    from_axis_angle,
    halfplane_exp,
    helmert_submatrix,
    landmarks_to_shape,
    normalize,
)
from .numerics import laguerre, solve_increasing
from .seeding import SeedLike, rng_from

KAPPA_MAX = 1e4
REJECTION_CAP = 1_000_000


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FisherModel:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        if self.kappa < 0:
            raise DomainError("kappa must be >= 0")
        object.__setattr__(self, "mu", normalize(np.asarray(self.mu, dtype=float)))

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    def density(self, x):
        """Density on S^2 relative to the uniform law."""
        t = np.asarray(x, dtype=float) @ self.mu
        k = self.kappa
        if k == 0:
            return np.ones_like(t)
        return 2 * k * np.exp(k * (t - 1)) / -np.expm1(-2 * k)


@dataclass(frozen=True)
class ProjectedNormalModel:
    """Law of ``g / |g|`` for ``g ~ N_3(mean, I_3)``."""

    mean: np.ndarray

    def density(self, x):
        """Density on S^2 relative to the uniform law."""
        m = np.asarray(self.mean, dtype=float)
        a = np.asarray(x, dtype=float) @ m
        radial = (1 + a * a) * special.ndtr(a) + a * np.exp(-a * a / 2) / np.sqrt(2 * np.pi)
        return 2 * np.exp((a * a - m @ m) / 2) * radial


@dataclass(frozen=True)
class AcgModel:
    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if np.max(np.abs(A - A.T)) > 1e-12:
            raise DomainError("A must be symmetric")
        vals = np.linalg.eigvalsh(A)
        if np.any(vals <= 0):
            raise DomainError("A must be positive definite")
        A = A / np.prod(vals) ** (1 / len(vals))
        object.__setattr__(self, "A", A)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        p = x.shape[-1]
        q = np.einsum("...i,ij,...j->...", x, np.linalg.inv(self.A), x)
        return q ** (-p / 2)


@dataclass(frozen=True)
class MatrixFisherModel:
    M: np.ndarray
    kappa: float

    def __post_init__(self):
        as_rotation(self.M)
        if self.kappa < 0:
            raise DomainError("kappa must be >= 0")


@dataclass(frozen=True)
class MardiaDrydenModel:
    mu: np.ndarray
    kappa: float
    k: int

    def __post_init__(self):
        if self.k < 3:
            raise DomainError("shapes need k >= 3")
        if self.kappa < 0:
            raise DomainError("kappa must be >= 0")
        mu = np.asarray(self.mu, dtype=complex)
        if mu.shape != (self.k - 1,):
            raise DomainError("mu must have k - 1 complex entries")
        object.__setattr__(self, "mu", canonical_phase(mu / np.linalg.norm(mu))[0])


@dataclass(frozen=True)
class DirichletModel:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if np.any(a <= 0):
            raise DomainError("alpha entries must be > 0")
        object.__setattr__(self, "alpha", a)

    @property
    def p(self) -> int:
        return len(self.alpha)


@dataclass(frozen=True)
class TangentGaussianModel:
    """Image under exp_m of a centred Gaussian on the tangent plane of H^2.

    ``cov`` is expressed in Riemannian-orthonormal coordinates at ``m``.
    """

    cov: np.ndarray = field(default_factory=lambda: np.eye(2))
    m: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def radial_cdf(self, r, theta):
        q = self._quad(theta)
        return -np.expm1(-0.5 * q * np.asarray(r, dtype=float) ** 2)

    def radial_ppf(self, F, theta):
        return np.sqrt(-2 * np.log1p(-np.asarray(F, dtype=float)) / self._quad(theta))

    def direction_density(self, theta):
        return 1.0 / self._quad(theta)

    def _quad(self, theta):
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        P = np.linalg.inv(np.asarray(self.cov, dtype=float))
        return np.einsum("...i,ij,...j->...", u, P, u)

    def sample_tangent(self, n, rng):
        return rng.multivariate_normal(np.zeros(2), self.cov, size=n)


@dataclass(frozen=True)
class LogNormalRadialModel:
    """Uniform direction and log-normal geodesic distance from ``m`` on H^2."""

    mean_log: float = 0.0
    sd_log: float = 0.5
    m: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def radial_cdf(self, r, theta):
        with np.errstate(divide="ignore"):
            return special.ndtr((np.log(r) - self.mean_log) / self.sd_log)

    def radial_ppf(self, F, theta):
        return np.exp(self.mean_log + self.sd_log * special.ndtri(F))

    def direction_density(self, theta):
        return np.ones_like(np.asarray(theta, dtype=float))

    def sample_tangent(self, n, rng):
        r = np.exp(self.mean_log + self.sd_log * rng.standard_normal(n))
        a = rng.uniform(0, 2 * np.pi, n)
        return r[:, None] * np.stack([np.cos(a), np.sin(a)], axis=1)


@dataclass(frozen=True)
class FitResult:
    model: object
    loglik: float = float("nan")
    flag: str | None = None


# ---------------------------------------------------------------------------
# Uniform samplers
# ---------------------------------------------------------------------------


def sample_uniform(space: str, n: int, seed: SeedLike = None, *, p: int = 3, k: int = 5) -> np.ndarray:
    """Exact uniform samples on a supported space.

    ``p`` is the ambient dimension for spheres/projective spaces and the
    number of components for simplices; ``k`` the landmark count for shapes.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = rng_from(seed)
    if space in ("sphere", "projective"):
        return normalize(rng.standard_normal((n, p)))
    if space == "rotation":
        from scipy.spatial.transform import Rotation

        q = normalize(rng.standard_normal((n, 4)))
        return Rotation.from_quat(q).as_matrix()
    if space == "shape":
        z = rng.standard_normal((n, k - 1)) + 1j * rng.standard_normal((n, k - 1))
        return canonical_phase(z / np.linalg.norm(z, axis=1, keepdims=True))
    if space == "simplex":
        e = rng.standard_exponential((n, p))
        return e / e.sum(axis=1, keepdims=True)
    raise DomainError(f"no uniform law on space {space!r}")


def _rotate_from_pole(x, mu):
    """Rotation taking the north pole to ``mu`` applied to rows of ``x`` (S^2)."""
    mu = normalize(mu)
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(z, mu)
    s, c = np.linalg.norm(v), z @ mu
    if s < 1e-15:
        return x if c > 0 else x * np.array([1.0, -1.0, -1.0])
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    R = np.eye(3) + K + K @ K * ((1 - c) / s**2)
    return x @ R.T


# ---------------------------------------------------------------------------
# Fisher
# ---------------------------------------------------------------------------


def sample_fisher(model: FisherModel, n: int, seed: SeedLike = None) -> np.ndarray:
    """Exact Fisher sample.

    On S^2 an inverse-CDF draw of ``t = x.mu`` and a uniform longitude; in
    other dimensions scipy's von Mises-Fisher sampler.
    """
    rng = rng_from(seed)
    if model.p != 3:
        if model.kappa == 0:
            return sample_uniform("sphere", n, rng, p=model.p)
        return stats.vonmises_fisher(model.mu, model.kappa).rvs(n, random_state=rng)
    q = rng.random(n)
    phi = rng.uniform(0, 2 * np.pi, n)
    k = model.kappa
    if k == 0:
        t = 2 * q - 1
    else:
        # q = P(T <= t) = (e^{k(t+1)} - 1) / (e^{2k} - 1)
        t = np.clip(1 + np.log1p((1 - q) * np.expm1(-2 * k)) / k, -1, 1)
    s = np.sqrt(np.clip(1 - t * t, 0, None))
    x = np.stack([s * np.cos(phi), s * np.sin(phi), t], axis=1)
    return _rotate_from_pole(x, model.mu)


def fisher_a3(kappa):
    """Mean resultant length ``coth(kappa) - 1/kappa`` of the Fisher law on S^2."""
    kappa = np.asarray(kappa, dtype=float)
    small = kappa < 1e-4
    ks = np.where(small, 1.0, kappa)
    big = 1 / np.tanh(ks) - 1 / ks
    return np.where(small, kappa / 3 - kappa**3 / 45, big)


def fisher_mle(points) -> FitResult | list[FitResult]:
    """Maximum likelihood estimates of ``mu`` and ``kappa`` on S^2.

    A batch ``(B, n, 3)`` returns a list of results. ``kappa`` is capped at
    1e4 (flag ``"kappa_cap"``); a numerically zero resultant returns
    ``kappa = 0`` with flag ``"degenerate"``.
    """
    x = np.asarray(points, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.shape[1] < 2:
        raise DomainError("need n >= 2")
    s = x.mean(axis=1)
    R = np.linalg.norm(s, axis=1)
    target = np.clip(R, 0.0, fisher_a3(KAPPA_MAX))
    kappa = solve_increasing(fisher_a3, target, 0.0, KAPPA_MAX, ftol=1e-14)
    results = []
    for b in range(len(x)):
        flag = None
        if R[b] < 1e-12:
            results.append(FitResult(FisherModel(np.array([0.0, 0.0, 1.0]), 0.0), flag="degenerate"))
            continue
        if R[b] >= fisher_a3(KAPPA_MAX):
            flag = "kappa_cap"
        k = float(kappa[b])
        mu = s[b] / R[b]
        m = FisherModel(mu, k)
        ll = float(np.sum(np.log(m.density(x[b]))))
        results.append(FitResult(m, ll, flag))
    return results[0] if single else results


def fisher_mle_batch(points):
    """Vectorised Fisher estimates: returns ``(mu_hat (B, 3), kappa_hat (B,))``."""
    x = np.asarray(points, dtype=float)
    s = x.mean(axis=1)
    R = np.linalg.norm(s, axis=1)
    target = np.clip(R, 0.0, fisher_a3(KAPPA_MAX))
    kappa = solve_increasing(fisher_a3, target, 0.0, KAPPA_MAX, ftol=1e-14)
    mu = s / np.where(R > 0, R, 1.0)[:, None]
    return mu, kappa


def sample_projected_normal(mean, n: int, seed: SeedLike = None) -> np.ndarray:
    rng = rng_from(seed)
    mean = np.asarray(mean, dtype=float)
    g = mean + rng.standard_normal((n, mean.shape[0]))
    norm = np.linalg.norm(g, axis=1)
    bad = norm == 0
    while np.any(bad):
        g[bad] = mean + rng.standard_normal((int(bad.sum()), mean.shape[0]))
        norm = np.linalg.norm(g, axis=1)
        bad = norm == 0
    return g / norm[:, None]


# ---------------------------------------------------------------------------
# ACG and matrix Fisher
# ---------------------------------------------------------------------------


def sample_acg(model: AcgModel, n: int, seed: SeedLike = None) -> np.ndarray:
    rng = rng_from(seed)
    vals, vecs = np.linalg.eigh(model.A)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    z = rng.standard_normal((n, len(vals)))
    return normalize(z @ root.T)


def sample_haar_angle(n: int, rng) -> np.ndarray:
    """Rotation angle under Haar measure: CDF ``(w - sin w) / pi``."""
    from .transforms.rotation import haar_angle_ppf

    return haar_angle_ppf(rng.random(n))


def sample_matrix_fisher(model: MatrixFisherModel, n: int, seed: SeedLike = None) -> np.ndarray:
    """Uniform axis and a Haar-proposal rejection sampler for the angle.

    Proposals from the Haar angle law are accepted with probability
    ``exp(-4 kappa sin^2(w / 2))``, the model-to-Haar density ratio scaled
    by its maximum ``e^{4 kappa}``.
    """
    rng = rng_from(seed)
    angles = np.empty(n)
    filled = 0
    draws = 0
    while filled < n:
        need = n - filled
        batch = max(64, 2 * need)
        w = sample_haar_angle(batch, rng)
        keep = rng.random(batch) < np.exp(-4 * model.kappa * np.sin(w / 2) ** 2)
        acc = w[keep][:need]
        angles[filled:filled + len(acc)] = acc
        filled += len(acc)
        draws += batch
        if draws > REJECTION_CAP * max(n, 1):
            raise NonConvergence("rejection sampler exceeded its draw cap")
    axis = normalize(rng.standard_normal((n, 3)))
    return np.asarray(model.M)[None] @ from_axis_angle(axis, angles)


# ---------------------------------------------------------------------------
# Mardia-Dryden
# ---------------------------------------------------------------------------


def md_density(model: MardiaDrydenModel, z) -> np.ndarray:
    """Density of MD([mu], kappa) relative to the uniform shape law.

    ``exp(-kappa (1 - cos^2 rho)) L_{k-2}(-kappa cos^2 rho)``; it integrates
    to one, as checked by quadrature in the tests.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    c2 = np.abs(z @ np.conj(model.mu)) ** 2
    return np.exp(-model.kappa * (1 - c2)) * laguerre(model.k - 2, -model.kappa * c2)


def md_log_density_c2(c2, kappa, k):
    """Log density as a function of ``cos^2 rho`` (broadcasts over kappa)."""
    return -kappa * (1 - c2) + np.log(laguerre(k - 2, -kappa * c2))


def regular_polygon(k: int, size: float = 0.5) -> np.ndarray:
    """Regular k-gon landmarks (complex) with centred Euclidean size ``size``."""
    z = np.exp(2j * np.pi * np.arange(k) / k)
    return z * size / np.linalg.norm(z - z.mean())


def md_template(model: MardiaDrydenModel, sigma: float = 1.0) -> np.ndarray:
    """Helmertized landmark template giving concentration ``kappa`` at noise ``sigma``.

    The isotropic offset-normal shape law has ``kappa = |H mu|^2 / (2 sigma^2)``.
    """
    return model.mu * np.sqrt(2 * model.kappa) * sigma


def sample_md_isotropic(model: MardiaDrydenModel, n: int, seed: SeedLike = None) -> np.ndarray:
    """Shapes of landmarks perturbed by i.i.d. isotropic Gaussian noise."""
    rng = rng_from(seed)
    h = md_template(model)
    m = model.k - 1
    z = h + rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    return canonical_phase(z / np.linalg.norm(z, axis=1, keepdims=True))


def sample_md_anisotropic(mu_landmarks, Sigma, n: int, seed: SeedLike = None) -> np.ndarray:
    """Shapes of ``mu + N_2(0, Sigma)`` landmark perturbations."""
    rng = rng_from(seed)
    mu = np.asarray(mu_landmarks, dtype=complex)
    k = len(mu)
    noise = rng.multivariate_normal(np.zeros(2), np.asarray(Sigma, dtype=float), size=(n, k))
    L = mu + noise[..., 0] + 1j * noise[..., 1]
    return landmarks_to_shape(L)


def complex_scatter(z):
    z = np.asarray(z, dtype=complex)
    return np.einsum("...ni,...nj->...ij", z, np.conj(z)) / z.shape[-2]


def _golden_max(obj, lo, hi, iters=90):
    """Vectorised golden-section maximisation of ``obj`` over ``[lo, hi]``."""
    g = (np.sqrt(5) - 1) / 2
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = obj(c), obj(d)
    for _ in range(iters):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - g * (b - a)
        new_d = a + g * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_next = np.where(left, np.nan, fd)
        fd_next = np.where(left, fc, np.nan)
        eval_c = obj(c_next)
        eval_d = obj(d_next)
        fc = np.where(left, eval_c, fc_next)
        fd = np.where(left, fd_next, eval_d)
        c, d = c_next, d_next
    x = 0.5 * (a + b)
    return x


def md_fit_isotropic(points, k: int | None = None):
    """Full Procrustes mean and profile MLE of ``kappa`` for MD([mu], kappa).

    ``mu`` is the dominant eigenvector of the complex scatter matrix and
    ``kappa`` maximises the log-likelihood by golden-section search in
    ``log kappa`` over [1e-6, 1e4]. Accepts ``(n, k-1)`` or ``(B, n, k-1)``.
    Flags: ``"kappa_cap"`` at the upper end, ``"flat"`` when the profile
    varies by less than 1e-10.
    """
    z = np.asarray(points, dtype=complex)
    single = z.ndim == 2
    if single:
        z = z[None]
    k = z.shape[-1] + 1 if k is None else k
    if z.shape[1] < 2:
        raise DomainError("need n >= 2")
    mu, kappa, ll, flags = md_fit_batch(z, k)
    out = [FitResult(MardiaDrydenModel(mu[b], float(kappa[b]), k), float(ll[b]), flags[b]) for b in range(len(z))]
    return out[0] if single else out


def md_fit_batch(z, k):
    z = np.asarray(z, dtype=complex)
    S = complex_scatter(z)
    vals, vecs = np.linalg.eigh(S)
    mu = vecs[..., :, -1]
    c2 = np.abs(np.einsum("bni,bi->bn", z, np.conj(mu))) ** 2
    lo, hi = np.log(1e-6), np.log(KAPPA_MAX)

    def profile(logk):
        kap = np.exp(logk)[:, None]
        return md_log_density_c2(c2, kap, k).sum(axis=1)

    B = len(z)
    logk = _golden_max(profile, np.full(B, lo), np.full(B, hi))
    kappa = np.exp(logk)
    ll = profile(logk)
    p_lo, p_hi = profile(np.full(B, lo)), profile(np.full(B, hi))
    spread = np.maximum(np.abs(ll - p_lo), np.abs(ll - p_hi))
    flags = []
    for b in range(B):
        if spread[b] < 1e-10:
            flags.append("flat")
        elif logk[b] > hi - 1e-6:
            flags.append("kappa_cap")
        else:
            flags.append(None)
    return canonical_phase(mu), kappa, ll, flags


# ---------------------------------------------------------------------------
# Dirichlet
# ---------------------------------------------------------------------------


def sample_dirichlet(model: DirichletModel, n: int, seed: SeedLike = None) -> np.ndarray:
    """Gamma-ratio construction."""
    rng = rng_from(seed)
    g = rng.standard_gamma(model.alpha, size=(n, model.p))
    return g / g.sum(axis=1, keepdims=True)


def dirichlet_density(model: DirichletModel, y) -> np.ndarray:
    """``Gamma(sum a) / prod Gamma(a_j) prod y_j^{a_j - 1}`` (Lebesgue on p-1 coordinates)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    a = model.alpha
    logc = special.gammaln(a.sum()) - special.gammaln(a).sum()
    with np.errstate(divide="ignore"):
        return np.exp(logc + special.xlogy(a - 1, np.maximum(y, 0.0)).sum(axis=1))


def dirichlet_density_ratio(model: DirichletModel, y) -> np.ndarray:
    """Density relative to the uniform law on the simplex."""
    return dirichlet_density(model, y) / special.gamma(model.p)


# ---------------------------------------------------------------------------
# Half-plane
# ---------------------------------------------------------------------------


def sample_halfplane(model, n: int, seed: SeedLike = None) -> np.ndarray:
    rng = rng_from(seed)
    v = model.sample_tangent(n, rng)
    m = np.asarray(model.m, dtype=float)
    return halfplane_exp(m, v * m[1])


def sample_halfplane_reference(n: int, seed: SeedLike = None, m=(0.0, 1.0)) -> np.ndarray:
    """Image under exp_m of the standard Gaussian on the tangent plane."""
    return sample_halfplane(TangentGaussianModel(np.eye(2), np.asarray(m, dtype=float)), n, seed)


# ---------------------------------------------------------------------------
# Generic
# ---------------------------------------------------------------------------


def sample(model, n: int, seed: SeedLike = None) -> np.ndarray:
    """Dispatch to the exact sampler of ``model``."""
    if isinstance(model, FisherModel):
        return sample_fisher(model, n, seed)
    if isinstance(model, ProjectedNormalModel):
        return sample_projected_normal(model.mean, n, seed)
    if isinstance(model, AcgModel):
        return sample_acg(model, n, seed)
    if isinstance(model, MatrixFisherModel):
        return sample_matrix_fisher(model, n, seed)
    if isinstance(model, MardiaDrydenModel):
        return sample_md_isotropic(model, n, seed)
    if isinstance(model, DirichletModel):
        return sample_dirichlet(model, n, seed)
    if isinstance(model, (TangentGaussianModel, LogNormalRadialModel)):
        return sample_halfplane(model, n, seed)
    raise DomainError(f"no sampler for {type(model).__name__}")


def sample_via_inverse_transform(transform, n: int, seed: SeedLike = None, **dims) -> np.ndarray:
    """Draw from the source law of ``transform`` by pulling back reference draws."""
    if transform.space == "halfplane":
        ref = sample_halfplane_reference(n, seed, getattr(transform, "m", (0.0, 1.0)))
    else:
        ref = sample_uniform(transform.space, n, seed, **dims)
    return transform.inverse(ref)
