"""Isotropic Mardia-Dryden transform on the planar shape space CP^{k-2}."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from ..errors import DomainError
from ..geometry import canonical_phase
from ..numerics import decaying_power_integrals, laguerre, solve_increasing
from .base import Transform


def md_uniform_cdf(x, k: int):
    """CDF ``1 - (1 - x)^{k-2}`` of ``cos^2 rho`` under the uniform shape law."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    if k == 2:
        return x
    with np.errstate(divide="ignore"):
        return -np.expm1((k - 2) * np.log1p(-x))


def md_uniform_ppf(q, k: int):
    q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        return -np.expm1(np.log1p(-q) / (k - 2))


def md_radial_density(s, kappa: float, k: int):
    """Density of ``s = cos^2 rho`` under MD([mu], kappa) with k landmarks.

    Equals ``(k-2) (1-s)^{k-3}`` (the uniform law) times the density ratio
    ``exp(-kappa (1 - s)) L_{k-2}(-kappa s)``.
    """
    s = np.asarray(s, dtype=float)
    return (k - 2) * (1 - s) ** (k - 3) * np.exp(-kappa * (1 - s)) * laguerre(k - 2, -kappa * s)


def md_cdf(x, kappa: float, k: int):
    """CDF of ``cos^2 rho`` under MD([mu], kappa).

    Expanding the Laguerre polynomial and ``(1 - s)^{k-3}`` gives

        (k-2) sum_i sum_r C(k-2,i) C(k-3,r) (-1)^r kappa^i / i!
              * exp(-kappa (1 - x)) int_0^x exp(-kappa (x - s)) s^{r+i} ds,

    where each integral has a kernel bounded by one.
    """
    if k < 3:
        raise DomainError("shapes need k >= 3")
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    if kappa == 0:
        return md_uniform_cdf(x, k)
    return np.clip((k - 2) * np.exp(-kappa * (1 - x)) * _md_sum(x, kappa, k), 0.0, 1.0)


def md_ppf(q, kappa: float, k: int):
    q = np.asarray(q, dtype=float)
    if kappa == 0:
        return md_uniform_ppf(q, k)
    raw = lambda x: (k - 2) * np.exp(-kappa * (1 - x)) * _md_sum(x, kappa, k)
    out = solve_increasing(raw, q, 0.0, 1.0, ftol=1e-14)
    return np.where(q <= 0, 0.0, np.where(q >= 1, 1.0, out))


def _md_sum(x, kappa, k):
    K = decaying_power_integrals(2 * k - 5, kappa, x)
    total = np.zeros_like(np.asarray(x, dtype=float))
    for i in range(k - 1):
        ci = comb(k - 2, i) * kappa**i / factorial(i)
        for r in range(k - 2):
            total = total + ci * comb(k - 3, r) * (-1) ** r * K[r + i]
    return total


def _shape_move(z, mu, t_new_of_t):
    """Rescale the component along ``mu`` from ``t = |<mu, z>|`` to ``t_new``."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    mu = np.asarray(mu, dtype=complex)
    a = z @ np.conj(mu)
    t = np.abs(a)
    phase = np.where(t > 0, np.conj(a) / np.where(t > 0, t, 1.0), 1.0)
    zt = z * phase[:, None]                     # now <mu, zt> = t is real
    tang = zt - t[:, None] * mu
    norm = np.linalg.norm(tang, axis=1)
    u = np.asarray(t_new_of_t(np.clip(t, 0.0, 1.0)), dtype=float)
    at_mu = norm < 1e-15
    scale = np.sqrt(np.clip((1 - u) * (1 + u), 0.0, None)) / np.where(at_mu, 1.0, norm)
    out = u[:, None] * mu + scale[:, None] * tang
    out[at_mu] = mu
    return canonical_phase(out)


@dataclass(frozen=True)
class MardiaDrydenTransform(Transform):
    """Transform of MD([mu], kappa); ``mu`` is a unit complex (k-1)-vector."""

    mu: np.ndarray
    kappa: float
    k: int
    space: str = "shape"

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=complex)
        if mu.shape != (self.k - 1,):
            raise DomainError("mu must have k - 1 complex entries")
        object.__setattr__(self, "mu", canonical_phase(mu / np.linalg.norm(mu))[0])

    def forward(self, z):
        if self.kappa == 0:
            return canonical_phase(z)
        f = lambda t: np.sqrt(md_uniform_ppf(md_cdf(t * t, self.kappa, self.k), self.k))
        return _shape_move(z, self.mu, f)

    def inverse(self, w):
        if self.kappa == 0:
            return canonical_phase(w)
        f = lambda u: np.sqrt(md_ppf(md_uniform_cdf(u * u, self.k), self.kappa, self.k))
        return _shape_move(w, self.mu, f)


def md_transform(z, mu, kappa: float, k: int):
    return MardiaDrydenTransform(np.asarray(mu, dtype=complex), kappa, k).forward(z)
