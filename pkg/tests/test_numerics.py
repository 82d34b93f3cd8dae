import mpmath as mp
import numpy as np
import pytest
from scipy import integrate, special

from manifold_pit.errors import DomainError, NonMonotone
from manifold_pit.numerics import (
    CircleCdf,
    ChebyshevCdf,
    MonotoneCdf,
    ScalarChebyshevCdf,
    adaptive_quadrature,
    chebyshev_nodes,
    decaying_power_integrals,
    digamma,
    exp_power_integrals,
    invert_cdf,
    laguerre,
    laguerre_coefficients,
    lower_incomplete_gamma_like,
    solve_increasing,
    trigamma,
)


def test_digamma_trigamma_reference_values():
    assert digamma(1.0) == pytest.approx(-float(mp.euler), abs=1e-15)
    assert trigamma(1.0) == pytest.approx(np.pi**2 / 6, abs=1e-14)
    for x in (0.3, 2.5, 17.0):
        assert digamma(x) == pytest.approx(float(mp.digamma(x)), rel=1e-13)
        assert trigamma(x) == pytest.approx(float(mp.polygamma(1, x)), rel=1e-13)


def test_digamma_recurrence():
    x = np.linspace(0.1, 20, 200)
    np.testing.assert_allclose(digamma(x + 1) - digamma(x), 1 / x, rtol=1e-12)


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_digamma_domain(x):
    with pytest.raises(DomainError):
        digamma(x)


def test_laguerre_low_orders():
    x = np.linspace(-2, 5, 11)
    np.testing.assert_allclose(laguerre(0, x), 1.0)
    np.testing.assert_allclose(laguerre(1, x), 1 - x)
    # explicit cubic: (-x^3 + 9x^2 - 18x + 6) / 6
    assert laguerre(3, 2.0) == pytest.approx((-8 + 36 - 36 + 6) / 6, abs=1e-14)
    with pytest.raises(DomainError):
        laguerre(-1, 0.0)


def test_laguerre_coefficients_match_recurrence():
    x = np.linspace(0, 3, 7)
    for n in range(6):
        poly = np.polynomial.polynomial.polyval(x, laguerre_coefficients(n))
        np.testing.assert_allclose(poly, laguerre(n, x), atol=1e-12)
        np.testing.assert_allclose(laguerre(n, x), special.eval_laguerre(n, x), atol=1e-12)


def test_incomplete_gamma_like_special_cases():
    x = np.array([0.1, 0.7, 2.0])
    for r in range(4):
        np.testing.assert_allclose(lower_incomplete_gamma_like(r, 0.0, x), x ** (r + 1) / (r + 1), rtol=1e-13)
    np.testing.assert_allclose(lower_incomplete_gamma_like(0, 1.5, x), -np.expm1(-1.5 * x) / 1.5, rtol=1e-13)


def test_incomplete_gamma_like_quadrature_oracle():
    ref, _ = integrate.quad(lambda s: np.exp(-3 * s) * s**2, 0, 0.7, epsabs=1e-14, epsrel=1e-14)
    assert lower_incomplete_gamma_like(2, 3.0, 0.7) == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("kappa", [-40.0, -3.0, 0.5, 12.0, 300.0])
def test_exp_power_integrals_vs_mpmath(kappa):
    x = np.array([0.05, 0.5, 1.0])
    got = exp_power_integrals(4, kappa, x)
    for m in range(5):
        for i, xv in enumerate(x):
            ref = mp.quad(lambda s: mp.e ** (-kappa * s) * s**m, [0, xv])
            assert got[m, i] == pytest.approx(float(ref), rel=1e-10, abs=1e-300)


def test_decaying_power_integrals_vs_mpmath():
    x = np.array([0.2, 1.0])
    got = decaying_power_integrals(3, 50.0, x)
    for m in range(4):
        for i, xv in enumerate(x):
            ref = mp.quad(lambda s: mp.e ** (-50 * (xv - s)) * s**m, [0, xv])
            assert got[m, i] == pytest.approx(float(ref), rel=1e-10)
    with pytest.raises(DomainError):
        decaying_power_integrals(2, -1.0, x)


def test_adaptive_quadrature_examples():
    assert adaptive_quadrature(np.sin, 0, np.pi) == pytest.approx(2.0, abs=1e-10)
    f = lambda w: np.exp(4 * 0.0 * np.cos(w / 2) ** 2) * np.sin(w / 2) ** 2
    assert adaptive_quadrature(f, 0, np.pi) == pytest.approx(np.pi / 2, abs=1e-10)
    g = lambda s: np.exp(-s) * np.cos(3 * s)
    whole = adaptive_quadrature(g, 0, 2)
    parts = adaptive_quadrature(g, 0, 0.7) + adaptive_quadrature(g, 0.7, 2)
    assert abs(whole - parts) <= 2e-10


def test_solve_increasing_and_invert_cdf():
    ident = MonotoneCdf(lambda r: r, upper=1.0)
    assert invert_cdf(ident, 0.3) == pytest.approx(0.3, abs=1e-12)
    assert invert_cdf(ident, 0.0) == 0.0
    assert invert_cdf(ident, 1.0) == 1.0
    square = MonotoneCdf(lambda r: r * r, upper=1.0)
    assert invert_cdf(square, 0.25) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(DomainError):
        invert_cdf(square, 1.5)
    roots = solve_increasing(np.exp, np.array([1.0, 2.0, 5.0]), 0.0, 3.0)
    np.testing.assert_allclose(roots, np.log([1.0, 2.0, 5.0]), atol=1e-12)


def test_monotone_cdf_check_flags_decrease():
    bad = MonotoneCdf(lambda r: np.sin(np.pi * r / 2) ** 2 * (1 - 0.5 * np.sin(4 * np.pi * r)), upper=1.0)
    with pytest.raises(NonMonotone):
        bad.check()


def test_scalar_chebyshev_cdf_beta():
    cdf = ScalarChebyshevCdf(lambda x: x * (1 - x) ** 2, 0.0, 1.0)
    x = np.linspace(0, 1, 41)
    exact = 12 * (x**2 / 2 - 2 * x**3 / 3 + x**4 / 4)
    np.testing.assert_allclose(cdf(x), exact, atol=1e-13)
    q = np.linspace(0.01, 0.99, 17)
    np.testing.assert_allclose(cdf(cdf.inverse(q)), q, atol=1e-12)


def test_batched_chebyshev_cdf_matches_scalar():
    a = np.array([0.0, 0.5])
    b = np.array([1.0, 2.0])
    nodes = chebyshev_nodes(a, b, 129)
    cdf = ChebyshevCdf(np.exp(-nodes) * nodes, a, b)
    r = np.array([0.3, 1.2])
    for i in range(2):
        ref, _ = integrate.quad(lambda s: np.exp(-s) * s, a[i], r[i])
        tot, _ = integrate.quad(lambda s: np.exp(-s) * s, a[i], b[i])
        assert cdf(r)[i] == pytest.approx(ref / tot, abs=1e-12)


def test_circle_cdf_von_mises():
    kappa, anchor = 2.0, 1.0
    density = lambda t: np.exp(kappa * np.cos(t - anchor))
    cdf = CircleCdf(density, anchor=anchor)
    for theta in (1.5, 3.0, 6.0):
        ref, _ = integrate.quad(density, anchor, theta, epsabs=1e-13)
        tot, _ = integrate.quad(density, 0, 2 * np.pi, epsabs=1e-13)
        assert cdf(theta) == pytest.approx(ref / tot, abs=1e-11)
    q = np.linspace(0.001, 0.999, 101)
    np.testing.assert_allclose(cdf(cdf.inverse(q)), q, atol=1e-11)
