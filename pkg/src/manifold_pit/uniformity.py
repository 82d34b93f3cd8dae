"""Uniformity tests, their null references and Monte Carlo calibration.

Each test returns a :class:`TestReport`. Statistic functions named
``*_statistic`` accept a single sample or a leading batch axis so that
calibration and simulation studies can evaluate many samples at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import integrate, special, stats
from scipy.spatial.transform import Rotation

from .errors import DomainError, ZeroCoordinate
from .numerics import trigamma, digamma
from .seeding import SeedLike, rng_from


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    reference: str
    n: int


@dataclass(frozen=True)
class NullQuantileTable:
    """Upper-tail quantiles of a statistic under uniformity.

    ``levels`` are upper-tail probabilities in decreasing order and
    ``values`` the matching quantiles, which are then nondecreasing.
    """

    test: str
    n: int
    levels: tuple
    values: tuple
    reps: int
    seed: int

    def __post_init__(self):
        if np.any(np.diff(self.values) < 0):
            raise DomainError("quantiles must be nondecreasing in 1 - level")

    def quantile(self, level: float) -> float:
        return float(np.interp(-level, -np.asarray(self.levels), self.values))

    def p_value(self, statistic):
        """Interpolated upper-tail probability; NaN outside the tabulated range."""
        s = np.asarray(statistic, dtype=float)
        v, lv = np.asarray(self.values), np.asarray(self.levels)
        p = np.interp(s, v, lv)
        return np.where((s < v[0]) | (s > v[-1]), np.nan, p)

    def to_json(self) -> str:
        data = {
            "test": self.test,
            "n": self.n,
            "seed": self.seed,
            "reps": self.reps,
            "quantiles": [{"level": float(a), "value": float(b)} for a, b in zip(self.levels, self.values)],
        }
        return json.dumps(data, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "NullQuantileTable":
        d = json.loads(text)
        q = d["quantiles"]
        return cls(d["test"], int(d["n"]), tuple(e["level"] for e in q), tuple(e["value"] for e in q),
                   int(d["reps"]), int(d["seed"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "NullQuantileTable":
        return cls.from_json(Path(path).read_text())


def _report(stat, p, reference, n):
    return TestReport(float(stat), float(np.clip(p, 0.0, 1.0)), reference, int(n))


def _check_n(n, minimum=2):
    if n < minimum:
        raise DomainError(f"need n >= {minimum}")


# ---------------------------------------------------------------------------
# Rayleigh and Bingham
# ---------------------------------------------------------------------------


def rayleigh_statistic(x):
    x = np.asarray(x, dtype=float)
    n, p = x.shape[-2], x.shape[-1]
    xbar = x.mean(axis=-2)
    return p * n * np.sum(xbar * xbar, axis=-1)


def rayleigh_test(x) -> TestReport:
    """``p n |xbar|^2`` referred to chi-square with p degrees of freedom."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, p = x.shape
    _check_n(n)
    s = rayleigh_statistic(x)
    return _report(s, stats.chi2.sf(s, p), f"chi2({p})", n)


def bingham_statistic(x):
    x = np.asarray(x, dtype=float)
    n, p = x.shape[-2], x.shape[-1]
    T = np.einsum("...ni,...nj->...ij", x, x) / n
    tr2 = np.einsum("...ij,...ji->...", T, T)
    return n * p * (p + 2) / 2 * (tr2 - 1.0 / p)


def bingham_test(x) -> TestReport:
    """Bingham's scatter-matrix test of uniformity on real projective space."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, p = x.shape
    _check_n(n)
    df = (p - 1) * (p + 2) // 2
    s = bingham_statistic(x)
    return _report(s, stats.chi2.sf(s, df), f"chi2({df})", n)


def so3_uniformity_test(R) -> TestReport:
    """Bingham test on unit quaternions, which are uniform on RP^3 under Haar measure."""
    R = np.asarray(R, dtype=float).reshape(-1, 3, 3)
    return bingham_test(Rotation.from_matrix(R).as_quat())


# ---------------------------------------------------------------------------
# Gine's F_n
# ---------------------------------------------------------------------------


def _pair_sum(x, chunk=512):
    """Sum over i < j of ``psi + sin psi`` for the angles between rows."""
    n = x.shape[0]
    total = 0.0
    for a in range(0, n, chunk):
        blk = x[a:a + chunk]
        c = np.clip(blk @ x.T, -1.0, 1.0)
        psi = np.arccos(c)
        val = psi + np.sqrt((1 - c) * (1 + c))
        rows = np.arange(a, a + len(blk))[:, None]
        total += val[rows < np.arange(n)[None, :]].sum()
    return total


def gine_statistic(x):
    """``3n/2 - 4/(n pi) sum_{i<j} (psi_ij + sin psi_ij)``; batches allowed."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-2]
    if x.ndim == 2:
        return 1.5 * n - 4.0 / (n * np.pi) * _pair_sum(x)
    c = np.clip(np.einsum("bni,bmi->bnm", x, x), -1.0, 1.0)
    val = np.arccos(c) + np.sqrt((1 - c) * (1 + c))
    iu = np.triu_indices(n, 1)
    return 1.5 * n - 4.0 / (n * np.pi) * val[:, iu[0], iu[1]].sum(axis=1)


@lru_cache(maxsize=1)
def gine_coefficients(kmax: int = 400) -> np.ndarray:
    """Weights ``c_k`` with ``F_n -> sum_k c_k chi2_{2k+1}`` under uniformity.

    ``c_k = 1/2 int_0^pi h(psi) P_k(cos psi) sin psi dpsi`` with the kernel
    ``h(psi) = 3/2 - 2 (psi + sin psi) / pi``. The kernel is degenerate,
    so ``c_0 = 0``; the first weights are 1/4, 1/16, 1/64.
    """
    t, w = np.polynomial.legendre.leggauss(4000)
    psi = np.arccos(t)
    h = 1.5 - 2 * (psi + np.sqrt(1 - t * t)) / np.pi
    P = np.empty((kmax + 1, len(t)))
    P[0] = 1.0
    P[1] = t
    for k in range(1, kmax):
        P[k + 1] = ((2 * k + 1) * t * P[k] - k * P[k - 1]) / (k + 1)
    return 0.5 * P @ (w * h)


def gine_asymptotic_sf(x) -> np.ndarray:
    """Upper tail of the limiting law of F_n by Imhof's inversion formula."""
    c = gine_coefficients()
    k = np.arange(len(c))
    keep = np.abs(c) > 1e-14
    c, dof = c[keep], (2 * k + 1)[keep]
    # the truncated tail contributes its mean only
    shift = 1.5 - float((c * dof).sum())

    def one(xv):
        y = xv - shift

        def integrand(u):
            theta = 0.5 * np.sum(dof * np.arctan(c * u)) - 0.5 * y * u
            log_rho = 0.25 * np.sum(dof * np.log1p((c * u) ** 2))
            return np.sin(theta) * np.exp(-log_rho) / u

        val, _ = integrate.quad(integrand, 0.0, np.inf, limit=500)
        return 0.5 + val / np.pi

    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.clip(np.array([one(v) for v in x]), 0.0, 1.0)


def gine_asymptotic_quantile(level: float) -> float:
    from scipy.optimize import brentq

    return brentq(lambda s: gine_asymptotic_sf(s)[0] - level, 0.5, 20.0, xtol=1e-10)


def gine_test(x, table: NullQuantileTable | None = None) -> TestReport:
    """Gine's F_n test on S^2.

    The p-value interpolates a Monte Carlo null table for the sample size
    when one is packaged (or passed); otherwise, and outside the table's
    range, the asymptotic law is used.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    _check_n(n)
    s = gine_statistic(x)
    table = table if table is not None else packaged_table("gine", n)
    if table is not None:
        p = float(table.p_value(s))
        if np.isfinite(p):
            return _report(s, p, f"monte-carlo table n={table.n}", n)
    return _report(s, gine_asymptotic_sf(s)[0], "asymptotic series", n)


# ---------------------------------------------------------------------------
# Kuiper and Kolmogorov-Smirnov
# ---------------------------------------------------------------------------


def kuiper_sf(lam):
    """Asymptotic upper tail ``2 sum_j (4 j^2 lam^2 - 1) exp(-2 j^2 lam^2)``."""
    lam = np.asarray(lam, dtype=float)
    j = np.arange(1, 101)[:, None]
    l2 = np.atleast_1d(lam)[None, :] ** 2
    terms = 2 * (4 * j**2 * l2 - 1) * np.exp(-2 * j**2 * l2)
    out = np.where(np.atleast_1d(lam) < 0.4, 1.0, terms.sum(axis=0))
    return np.clip(out, 0.0, 1.0).reshape(lam.shape)


def _ecdf_extremes(u):
    u = np.sort(np.asarray(u, dtype=float), axis=-1)
    n = u.shape[-1]
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - u, axis=-1)
    d_minus = np.max(u - (i - 1) / n, axis=-1)
    return d_plus, d_minus


def kuiper_statistic(angles):
    u = np.mod(np.asarray(angles, dtype=float), 2 * np.pi) / (2 * np.pi)
    dp, dm = _ecdf_extremes(u)
    return dp + dm


def kuiper_test(angles) -> TestReport:
    """Kuiper's V_n for uniformity of angles.

    The p-value uses the asymptotic series at the modified statistic
    ``V_n (sqrt n + 0.155 + 0.24 / sqrt n)``.
    """
    a = np.ravel(np.asarray(angles, dtype=float))
    n = len(a)
    _check_n(n, 1)
    v = kuiper_statistic(a)
    rn = np.sqrt(n)
    return _report(v, kuiper_sf(v * (rn + 0.155 + 0.24 / rn)), "asymptotic series (modified)", n)


def ks_statistic(values):
    dp, dm = _ecdf_extremes(values)
    return np.maximum(dp, dm)


def ks_test(values) -> TestReport:
    """Kolmogorov-Smirnov D_n against Uniform(0, 1).

    The p-value is the Kolmogorov limit law at ``D_n (sqrt n + 0.12 + 0.11 / sqrt n)``.
    """
    v = np.ravel(np.asarray(values, dtype=float))
    n = len(v)
    _check_n(n, 1)
    d = ks_statistic(v)
    rn = np.sqrt(n)
    return _report(d, special.kolmogorov(d * (rn + 0.12 + 0.11 / rn)), "asymptotic series (modified)", n)


# ---------------------------------------------------------------------------
# Independence of longitude and colatitude
# ---------------------------------------------------------------------------

N_PERMUTATIONS = 2000


def circular_linear_rank_statistic(angles, values):
    """Circular-linear rank correlation ``24 (T_c^2 + T_s^2) / (n^2 (n + 1))``.

    ``T_c = sum_i r_i cos(2 pi s_i / n)`` with ``s_i`` the circular ranks of
    the angles and ``r_i`` the ranks of the linear values; ``values`` may
    carry leading batch axes (one row per permutation).
    """
    a = np.asarray(angles, dtype=float)
    n = a.shape[-1]
    s = stats.rankdata(np.mod(a, 2 * np.pi), axis=-1)
    r = stats.rankdata(np.asarray(values, dtype=float), axis=-1)
    beta = 2 * np.pi * s / n
    tc = np.sum(r * np.cos(beta), axis=-1)
    ts = np.sum(r * np.sin(beta), axis=-1)
    return 24 * (tc**2 + ts**2) / (n**2 * (n + 1))


def independence_test(longitude, colatitude, seed: SeedLike = 0,
                      permutations: int = N_PERMUTATIONS) -> TestReport:
    """Permutation test of independence between an angle and a real variable."""
    a = np.ravel(np.asarray(longitude, dtype=float))
    v = np.ravel(np.asarray(colatitude, dtype=float))
    n = len(a)
    if n < 10:
        raise DomainError("the independence test needs n >= 10")
    obs = circular_linear_rank_statistic(a, v)
    rng = rng_from(seed)
    perm = np.argsort(rng.random((permutations, n)), axis=1)
    null = circular_linear_rank_statistic(a[None, :], v[perm])
    p = (1 + np.sum(null >= obs - 1e-12)) / (permutations + 1)
    return _report(obs, p, f"permutation({permutations})", n)


# ---------------------------------------------------------------------------
# Shapes and compositions
# ---------------------------------------------------------------------------


def mardia_shape_statistic(z):
    z = np.asarray(z, dtype=complex)
    n, m = z.shape[-2], z.shape[-1]
    S = np.einsum("...ni,...nj->...ij", z, np.conj(z)) / n
    tr2 = np.einsum("...ij,...ji->...", S, S).real
    return n * m * (m + 1) * (tr2 - 1.0 / m)


def mardia_shape_test(z) -> TestReport:
    """Complex scatter test of uniformity on planar shape space.

    With ``m = k - 1`` complex pre-shape coordinates, the statistic
    ``n m (m + 1) (tr S^2 - 1/m)`` is referred to chi-square with
    ``m^2 - 1`` degrees of freedom.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    n, m = z.shape
    _check_n(n)
    df = m * m - 1
    s = mardia_shape_statistic(z)
    return _report(s, stats.chi2.sf(s, df), f"chi2({df})", n)


def dirichlet_score_statistic(y):
    """Score statistic for ``alpha = 1`` within the Dirichlet family.

    ``S = n / psi'(1) [sum_j v_j^2 + psi'(p) / (psi'(1) - p psi'(p)) (sum_j v_j)^2]``
    where ``v_j = mean_i log y_ij + psi(p) - psi(1)`` is the per-observation
    score and the bracket applies the inverse Fisher information.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ZeroCoordinate("all coordinates must be > 0")
    n, p = y.shape[-2], y.shape[-1]
    v = np.log(y).mean(axis=-2) + digamma(p) - digamma(1.0)
    a, b = trigamma(1.0), trigamma(float(p))
    return n / a * (np.sum(v * v, axis=-1) + b / (a - p * b) * np.sum(v, axis=-1) ** 2)


def dirichlet_score_test(y) -> TestReport:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, p = y.shape
    _check_n(n)
    s = dirichlet_score_statistic(y)
    return _report(s, stats.chi2.sf(s, p), f"chi2({p})", n)


# ---------------------------------------------------------------------------
# Standard Gaussian reference on a tangent plane
# ---------------------------------------------------------------------------


def gaussian_moment_statistic(v):
    """``n |vbar|^2 + n/2 |S - I|_F^2`` with ``S`` the raw second-moment matrix (2-D)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[-2]
    vbar = v.mean(axis=-2)
    S = np.einsum("...ni,...nj->...ij", v, v) / n
    D = S - np.eye(v.shape[-1])
    return n * np.sum(vbar * vbar, axis=-1) + n / 2 * np.sum(D * D, axis=(-2, -1))


def gaussian_moment_test(v) -> TestReport:
    """Moment test of ``N(0, I_2)`` for tangent coordinates; chi-square with 5 df."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n, d = v.shape
    if d != 2:
        raise DomainError("the moment test is for planar coordinates")
    _check_n(n)
    s = gaussian_moment_statistic(v)
    return _report(s, stats.chi2.sf(s, 5), "chi2(5)", n)


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


def _null_sampler(test: str, n: int, rng):
    from .models import sample_uniform

    if test in ("rayleigh", "gine"):
        return lambda b: sample_uniform("sphere", b * n, rng).reshape(b, n, 3)
    if test == "bingham":
        return lambda b: sample_uniform("projective", b * n, rng).reshape(b, n, 3)
    if test == "so3":
        return lambda b: sample_uniform("sphere", b * n, rng, p=4).reshape(b, n, 4)
    if test in ("kuiper",):
        return lambda b: rng.uniform(0, 2 * np.pi, (b, n))
    if test == "ks":
        return lambda b: rng.random((b, n))
    if test == "mardia_shape":
        return lambda b: sample_uniform("shape", b * n, rng, k=5).reshape(b, n, 4)
    if test == "dirichlet_score":
        return lambda b: sample_uniform("simplex", b * n, rng, p=3).reshape(b, n, 3)
    if test == "gaussian":
        return lambda b: rng.standard_normal((b, n, 2))
    raise DomainError(f"no calibration for test {test!r}")


STATISTICS = {
    "rayleigh": rayleigh_statistic,
    "gine": gine_statistic,
    "bingham": bingham_statistic,
    "so3": bingham_statistic,
    "kuiper": kuiper_statistic,
    "ks": ks_statistic,
    "mardia_shape": mardia_shape_statistic,
    "dirichlet_score": dirichlet_score_statistic,
    "gaussian": gaussian_moment_statistic,
}

TABLE_LEVELS = tuple(np.round(np.arange(999, 0, -1) / 1000, 3))


def null_statistics(test: str, n: int, reps: int, seed: int, batch: int | None = None) -> np.ndarray:
    """Statistics of ``reps`` uniform samples of size ``n`` (deterministic in ``seed``)."""
    if batch is None:
        batch = int(max(1, min(200, 2_000_000 // (n * n if test == "gine" else n))))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(n)]))
    draw = _null_sampler(test, n, rng)
    stat = STATISTICS[test]
    out = []
    done = 0
    while done < reps:
        b = min(batch, reps - done)
        out.append(np.asarray(stat(draw(b)), dtype=float))
        done += b
    return np.concatenate(out)


def calibrate_null(test: str, n: int, reps: int = 10_000, seed: int = 20240101) -> NullQuantileTable:
    """Monte Carlo null quantiles at the levels 0.999, 0.998, ..., 0.001."""
    if reps < 10_000:
        raise DomainError("calibration needs at least 10^4 replications")
    s = null_statistics(test, n, reps, seed)
    vals = np.quantile(s, 1 - np.asarray(TABLE_LEVELS))
    vals = np.maximum.accumulate(vals)
    return NullQuantileTable(test, int(n), TABLE_LEVELS, tuple(float(v) for v in vals), int(reps), int(seed))


@lru_cache(maxsize=None)
def packaged_table(test: str, n: int) -> NullQuantileTable | None:
    """Null table shipped with the package for ``(test, n)``, if any."""
    ref = resources.files("manifold_pit").joinpath("tables", f"{test}_{n}.json")
    if not ref.is_file():
        return None
    return NullQuantileTable.from_json(ref.read_text())


TESTS = {
    "rayleigh": rayleigh_test,
    "gine": gine_test,
    "bingham": bingham_test,
    "so3": so3_uniformity_test,
    "kuiper": kuiper_test,
    "ks": ks_test,
    "mardia_shape": mardia_shape_test,
    "dirichlet_score": dirichlet_score_test,
    "gaussian": gaussian_moment_test,
}
