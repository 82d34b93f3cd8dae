"""Special functions, quadrature and monotone CDF inversion.

Every transform in the package reduces to evaluating a conditional CDF
along a ray and inverting another one, so the two workhorses here are
:class:`ChebyshevCdf` (batched spectral integration of a density sampled
along many rays at once) and :func:`solve_increasing` (a vectorised
bracketed root finder).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import fft, special

from .errors import DomainError, NonConvergence, NonMonotone

CHEB_NODES = 257


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------

def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("argument must be > 0")
    return x


def digamma(x):
    """Digamma function psi(x) for x > 0."""
    return special.psi(_check_positive(x))


def trigamma(x):
    """Trigamma function psi'(x) for x > 0."""
    return special.polygamma(1, _check_positive(x))


def laguerre(n: int, x):
    """Laguerre polynomial L_n(x) by the three-term recurrence."""
    if n < 0:
        raise DomainError("order must be >= 0")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), 1.0 - x
    if n == 0:
        return prev
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur


def laguerre_coefficients(n: int) -> np.ndarray:
    """Power-series coefficients of L_n: L_n(x) = sum_i c_i x^i."""
    return np.array([comb(n, i) * (-1) ** i / factorial(i) for i in range(n + 1)])


def decaying_power_integrals(m_max: int, kappa: float, x) -> np.ndarray:
    """K_m(x) = int_0^x exp(-kappa (x - s)) s^m ds for m = 0..m_max.

    Returns an array of shape ``(m_max + 1,) + x.shape``. The kernel never
    exceeds one, so no overflow occurs for large ``kappa``. A power series
    is used while ``kappa * x <= m + 1`` (terms decrease monotonically), the
    upward recurrence ``K_m = (x^m - m K_{m-1}) / kappa`` otherwise.
    """
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    x = np.asarray(x, dtype=float)
    out = np.empty((m_max + 1,) + x.shape)
    y = kappa * x
    for m in range(m_max + 1):
        series = y <= m + 1
        res = np.empty_like(x)
        if np.any(series):
            xs, ys = x[series], y[series]
            # m! x^{m+1} sum_j (-y)^j / (m+j+1)!
            term = xs ** (m + 1) / (m + 1)
            acc = term.copy()
            for j in range(1, 400):
                term = term * (-ys) / (m + j + 1)
                acc += term
                if np.all(np.abs(term) <= 1e-17 * np.abs(acc)):
                    break
            res[series] = acc
        rec = ~series
        if np.any(rec):
            xr = x[rec]
            if m == 0:
                res[rec] = -np.expm1(-kappa * xr) / kappa
            else:
                res[rec] = (xr**m - m * out[m - 1][rec]) / kappa
        out[m] = res
    return out


def exp_power_integrals(m_max: int, kappa: float, x) -> np.ndarray:
    """I_m(x) = int_0^x exp(-kappa s) s^m ds for m = 0..m_max (any real kappa).

    For ``kappa > 1e-8`` the recurrence ``I_m = (m I_{m-1} - x^m e^{-kappa x}) / kappa``
    is used where it is stable (``kappa x > m + 1``); a series otherwise.
    Negative ``kappa`` goes through :func:`decaying_power_integrals`.
    """
    x = np.asarray(x, dtype=float)
    if kappa < 0:
        return np.exp(-kappa * x) * decaying_power_integrals(m_max, -kappa, x)
    out = np.empty((m_max + 1,) + x.shape)
    y = kappa * x
    for m in range(m_max + 1):
        series = (y <= m + 1) | (kappa <= 1e-8)
        res = np.empty_like(x)
        if np.any(series):
            xs, ys = x[series], y[series]
            term = xs ** (m + 1)
            acc = term / (m + 1)
            for j in range(1, 400):
                term = term * (-ys) / j
                inc = term / (m + j + 1)
                acc += inc
                if np.all(np.abs(inc) <= 1e-17 * np.abs(acc)):
                    break
            res[series] = acc
        rec = ~series
        if np.any(rec):
            xr = x[rec]
            if m == 0:
                res[rec] = -np.expm1(-kappa * xr) / kappa
            else:
                res[rec] = (m * out[m - 1][rec] - xr**m * np.exp(-kappa * xr)) / kappa
        out[m] = res
    return out


def lower_incomplete_gamma_like(r: int, kappa: float, x):
    """int_0^x exp(-kappa s) s^r ds."""
    return exp_power_integrals(r, kappa, x)[r]


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def adaptive_quadrature(f: Callable[[float], float], a: float, b: float,
                        tol: float = 1e-10, max_evals: int = 1_000_000) -> float:
    """Adaptive Simpson quadrature of a scalar function on [a, b].

    Intervals are bisected until the Richardson estimate ``|S2 - S1| / 15``
    falls below the tolerance share of that interval.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    evals = 3
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        evals += 2
        if evals > max_evals:
            raise NonConvergence(f"adaptive quadrature exceeded {max_evals} evaluations")
        left = (mid - lo) * (flo + 4 * flm + fmid) / 6
        right = (hi - mid) * (fmid + 4 * frm + fhi) / 6
        delta = left + right - s
        if abs(delta) <= 15 * eps or depth >= 60:
            total += left + right + delta / 15
        else:
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
    return sign * total


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


# ---------------------------------------------------------------------------
# Root finding and CDF inversion
# ---------------------------------------------------------------------------

def solve_increasing(func: Callable[[np.ndarray], np.ndarray], target, lo, hi,
                     ftol: float = 1e-13, maxiter: int = 200) -> np.ndarray:
    """Solve ``func(x) = target`` elementwise for a nondecreasing ``func``.

    ``func`` maps an array of abscissae (one per problem) to an array of
    values. Iterations alternate a regula-falsi step with plain bisection,
    so the bracket at least halves every two steps and no derivative is
    needed.
    """
    target = np.asarray(target, dtype=float)
    shape = np.broadcast_shapes(target.shape, np.shape(lo), np.shape(hi))
    target = np.broadcast_to(target, shape).astype(float)
    a = np.broadcast_to(np.asarray(lo, dtype=float), shape).copy()
    b = np.broadcast_to(np.asarray(hi, dtype=float), shape).copy()
    fa = func(a) - target
    fb = func(b) - target
    slack = 1e-12
    if np.any(fa > slack) or np.any(fb < -slack):
        raise NonMonotone("target not bracketed by the function values at the ends")
    x = np.where(np.abs(fa) <= np.abs(fb), a, b)
    fx = np.where(np.abs(fa) <= np.abs(fb), fa, fb)
    done = np.abs(fx) <= ftol
    for it in range(maxiter):
        if np.all(done):
            return x
        width = b - a
        denom = fb - fa
        with np.errstate(divide="ignore", invalid="ignore"):
            sec = a - fa * width / denom
        bad = ~np.isfinite(sec) | (sec <= a + 0.01 * width) | (sec >= b - 0.01 * width)
        cand = np.where(bad | (it % 2 == 1), 0.5 * (a + b), sec)
        fc = func(cand) - target
        upd = ~done
        x = np.where(upd, cand, x)
        fx = np.where(upd, fc, fx)
        below = upd & (fc < 0)
        above = upd & (fc >= 0)
        a = np.where(below, cand, a)
        fa = np.where(below, fc, fa)
        b = np.where(above, cand, b)
        fb = np.where(above, fc, fb)
        tiny = (b - a) <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(x))
        done = done | (np.abs(fx) <= ftol) | tiny
    if not np.all(done):
        raise NonConvergence("bracketed solver did not converge")
    return x


@dataclass(frozen=True)
class MonotoneCdf:
    """A nondecreasing map from [lower, upper] onto [0, 1]."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    upper: float
    lower: float = 0.0

    def __call__(self, r):
        return self.evaluator(np.asarray(r, dtype=float))

    def check(self, grid: int = 1024, tol: float = 1e-10) -> None:
        r = np.linspace(self.lower, self.upper, grid)
        vals = self(r)
        if abs(vals[0]) > tol or abs(vals[-1] - 1.0) > tol:
            raise NonMonotone("CDF does not run from 0 to 1 over its support")
        if np.any(np.diff(vals) < -tol):
            raise NonMonotone("CDF decreases on the check grid")


def invert_cdf(cdf: MonotoneCdf, q, maxiter: int = 200):
    """Quantile of a :class:`MonotoneCdf` at level(s) ``q``."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise DomainError("levels must lie in [0, 1]")
    out = solve_increasing(cdf, q, cdf.lower, cdf.upper, ftol=1e-13, maxiter=maxiter)
    out = np.where(q == 0, cdf.lower, out)
    out = np.where(q == 1, cdf.upper, out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Batched spectral CDFs
# ---------------------------------------------------------------------------

def chebyshev_nodes(a, b, n: int = CHEB_NODES) -> np.ndarray:
    """Chebyshev-Lobatto points mapped to [a, b]; shape ``(n,) + shape(a)``."""
    x = np.cos(np.pi * np.arange(n) / (n - 1))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x = x.reshape((n,) + (1,) * a.ndim)
    return 0.5 * (a + b) + 0.5 * (b - a) * x


class ChebyshevCdf:
    """Conditional radial CDFs for a batch of rays.

    ``values[j, i]`` is a nonnegative density sampled at the Chebyshev-Lobatto
    node ``j`` of ray ``i``'s interval ``[a_i, b_i]``. The density is
    expanded in Chebyshev polynomials, integrated exactly and normalised, so
    evaluation is spectrally accurate for smooth densities.
    """

    def __init__(self, values: np.ndarray, a, b):
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        self.a = np.broadcast_to(np.asarray(a, dtype=float), values.shape[1:]).copy()
        self.b = np.broadcast_to(np.asarray(b, dtype=float), values.shape[1:]).copy()
        coef = fft.dct(values, type=1, axis=0) / (n - 1)
        coef[0] /= 2
        coef[-1] /= 2
        integ = C.chebint(coef, lbnd=-1, axis=0)
        total = C.chebval(1.0, integ)
        if np.any(~(total > 0)):
            raise NonMonotone("density integrates to a non-positive mass along a ray")
        self._coef = integ / total
        self.mass = total * 0.5 * (self.b - self.a)

    def _to_unit(self, r):
        return np.clip((2 * np.asarray(r, dtype=float) - self.a - self.b) / (self.b - self.a), -1.0, 1.0)

    def __call__(self, r) -> np.ndarray:
        vals = C.chebval(self._to_unit(r), self._coef, tensor=False)
        return np.clip(vals, 0.0, 1.0)

    def inverse(self, q) -> np.ndarray:
        q = np.broadcast_to(np.asarray(q, dtype=float), self.a.shape)
        raw = lambda r: C.chebval(self._to_unit(r), self._coef, tensor=False)
        out = solve_increasing(raw, q, self.a, self.b, ftol=1e-14)
        out = np.where(q <= 0, self.a, out)
        return np.where(q >= 1, self.b, out)

    def take(self, index) -> "ChebyshevCdf":
        new = object.__new__(ChebyshevCdf)
        new.a, new.b = self.a[index], self.b[index]
        new._coef = self._coef[:, index]
        new.mass = self.mass[index]
        return new


class ScalarChebyshevCdf:
    """CDF of a single smooth density on [a, b], built from Chebyshev-Lobatto samples.

    ``density`` is called once on the ``n`` nodes.
    """

    def __init__(self, density: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                 n: int = CHEB_NODES):
        self.a, self.b = float(a), float(b)
        nodes = chebyshev_nodes(self.a, self.b, n)
        values = np.asarray(density(nodes), dtype=float)
        coef = fft.dct(values, type=1) / (n - 1)
        coef[0] /= 2
        coef[-1] /= 2
        integ = C.chebint(coef, lbnd=-1)
        total = C.chebval(1.0, integ)
        if not total > 0:
            raise NonMonotone("density integrates to a non-positive mass")
        self._coef = integ / total
        self.mass = float(total * 0.5 * (self.b - self.a))

    def _unit(self, r):
        return np.clip((2 * np.asarray(r, dtype=float) - self.a - self.b) / (self.b - self.a), -1.0, 1.0)

    def _raw(self, r):
        return C.chebval(self._unit(r), self._coef)

    def __call__(self, r):
        return np.clip(self._raw(r), 0.0, 1.0)

    def inverse(self, q):
        q = np.asarray(q, dtype=float)
        out = solve_increasing(self._raw, q, self.a, self.b, ftol=1e-14)
        out = np.where(q <= 0, self.a, out)
        return np.where(q >= 1, self.b, out)


class CircleCdf:
    """CDF of a smooth density on the circle, measured counterclockwise from an anchor.

    The density is sampled on ``n`` equispaced angles and integrated
    through its Fourier series, which is spectrally accurate for smooth
    periodic densities.
    """

    def __init__(self, density: Callable[[np.ndarray], np.ndarray], anchor: float = 0.0,
                 n: int = 256):
        theta = 2 * np.pi * np.arange(n) / n
        vals = np.asarray(density(theta), dtype=float)
        spec = np.fft.rfft(vals) / n
        self.anchor = float(anchor)
        self._a0 = spec[0].real
        if not self._a0 > 0:
            raise NonMonotone("circle density has non-positive mass")
        k = np.arange(1, len(spec))
        self._k = k
        # f(theta) = a0 + sum_k 2 Re(c_k e^{i k theta}); drop the Nyquist term
        c = 2 * spec[1:]
        if n % 2 == 0:
            c[-1] = 0.0
        self._c = c

    def _series(self, theta):
        """Primitive and density of the Fourier series at ``theta``."""
        theta = np.asarray(theta, dtype=float)
        e = np.exp(1j * np.multiply.outer(theta, self._k))
        prim = self._a0 * theta + (e * (self._c / (1j * self._k))).real.sum(-1)
        dens = self._a0 + (e * self._c).real.sum(-1)
        return prim, dens

    def _primitive(self, theta):
        return self._series(theta)[0]

    def __call__(self, theta):
        """Mass of the arc from the anchor counterclockwise to ``theta``."""
        rel = np.mod(np.asarray(theta, dtype=float) - self.anchor, 2 * np.pi)
        p0 = self._primitive(self.anchor)
        val = (self._primitive(self.anchor + rel) - p0) / (2 * np.pi * self._a0)
        return np.clip(val, 0.0, 1.0)

    def inverse(self, q):
        """Angle in ``[anchor, anchor + 2 pi]`` whose CDF value is ``q``."""
        q = np.asarray(q, dtype=float)
        scale = 2 * np.pi * self._a0
        p0 = self._primitive(self.anchor)
        raw = lambda rel: (self._primitive(self.anchor + rel) - p0) / scale
        # bracket each root on a table, then run safeguarded Newton steps
        grid = np.linspace(0.0, 2 * np.pi, 1025)
        table = np.maximum.accumulate(raw(grid))
        j = np.clip(np.searchsorted(table, q, side="right"), 1, len(grid) - 1)
        lo = np.where(q <= table[j - 1], 0.0, grid[j - 1])
        hi = np.where(q > table[j], 2 * np.pi, grid[j])
        x = np.clip(np.interp(q, table, grid), lo, hi)
        done = np.zeros(q.shape, dtype=bool)
        for _ in range(12):
            prim, dens = self._series(self.anchor + x)
            r = (prim - p0) / scale - q
            done = np.abs(r) <= 1e-14
            if np.all(done):
                return self.anchor + x
            lo = np.where(r < 0, x, lo)
            hi = np.where(r > 0, x, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = x - r * scale / dens
            inside = np.isfinite(step) & (step > lo) & (step < hi)
            x = np.where(done, x, np.where(inside, step, 0.5 * (lo + hi)))
        if not np.all(done):
            x = np.where(done, x, solve_increasing(raw, q, lo, hi, ftol=1e-14))
        return self.anchor + x

    def transform(self, theta):
        """Uniformising map: angle to ``anchor + 2 pi F(angle)``."""
        return self.anchor + 2 * np.pi * self(theta)

    def untransform(self, theta):
        q = np.mod(np.asarray(theta, dtype=float) - self.anchor, 2 * np.pi) / (2 * np.pi)
        return self.inverse(q)
