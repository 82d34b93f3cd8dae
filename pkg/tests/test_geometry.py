import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from manifold_pit.errors import AmbiguousMedian, PoleError
from manifold_pit.geometry import (
    UniformFlag,
    canonical_phase,
    frechet_median,
    halfplane_distance,
    halfplane_exp,
    halfplane_log,
    landmarks_to_shape,
    normalize,
    radial_projection,
    shape_distance,
    simplex_exp,
    simplex_log,
    simplex_max_radius,
    sphere_distance,
    tangent_normal_compose,
    tangent_normal_decompose,
    torus_cut_radius,
)
from manifold_pit.models import FisherModel, sample_fisher, sample_uniform

M = np.array([0.0, 0.0, 1.0])


def test_decompose_examples():
    x = np.array([1.0, 0.0, 0.0])
    r, u = tangent_normal_decompose(x, M)
    assert r == pytest.approx(np.pi / 2)
    np.testing.assert_allclose(u, x)
    y = np.array([np.sin(0.3), 0.0, np.cos(0.3)])
    r, u = tangent_normal_decompose(y, M)
    assert r == pytest.approx(0.3, abs=1e-14)
    np.testing.assert_allclose(u, [1.0, 0.0, 0.0], atol=1e-14)
    with pytest.raises(PoleError):
        tangent_normal_decompose(-M, M)


def test_compose_examples_and_round_trip():
    u = np.array([0.0, 1.0, 0.0])
    np.testing.assert_allclose(tangent_normal_compose(0.0, u, M), M)
    np.testing.assert_allclose(tangent_normal_compose(np.pi / 2, u, M), u, atol=1e-16)
    rng = np.random.default_rng(0)
    m = normalize(rng.normal(size=3))
    x = sample_uniform("sphere", 1000, rng)
    r, uu = tangent_normal_decompose(x, m)
    np.testing.assert_allclose(tangent_normal_compose(r, uu, m), x, atol=1e-12)


def test_torus_cut_radius():
    assert torus_cut_radius(0.0) == pytest.approx(np.pi)
    assert torus_cut_radius(np.pi / 4) == pytest.approx(np.pi * np.sqrt(2))
    assert torus_cut_radius(np.pi / 2) == pytest.approx(np.pi)


def test_halfplane_vertical_geodesic():
    m = np.array([0.0, 1.0])
    np.testing.assert_allclose(halfplane_exp(m, np.zeros(2)), m)
    for s in (0.3, 1.0, 2.5):
        np.testing.assert_allclose(halfplane_exp(m, np.array([0.0, s])), [0.0, np.exp(s)], rtol=1e-13, atol=1e-13)


def test_halfplane_geodesic_against_ode():
    # geodesic equations of ds^2 = (dx^2 + dy^2) / y^2
    m = np.array([0.4, 1.3])
    v = np.array([0.7, -0.2])

    def rhs(_, s):
        x, y, dx, dy = s
        return [dx, dy, 2 * dx * dy / y, (dy * dy - dx * dx) / y]

    # coordinate components: the initial velocity is v itself
    sol = integrate.solve_ivp(rhs, (0, 1), [*m, *v], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(halfplane_exp(m, v), sol.y[:2, -1], atol=1e-9)


def test_halfplane_round_trip_and_distance():
    rng = np.random.default_rng(1)
    m = np.array([0.3, 2.0])
    v = rng.normal(size=(1000, 2)) * 1.5
    x = halfplane_exp(m, v)
    np.testing.assert_allclose(halfplane_log(m, x), v, atol=1e-9)
    np.testing.assert_allclose(halfplane_distance(np.broadcast_to(m, x.shape), x),
                               np.linalg.norm(v, axis=1) / m[1], atol=1e-9)


def test_simplex_exp_and_log():
    c = np.full(3, 1 / 3)
    u = np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    np.testing.assert_allclose(simplex_exp(0.0, u), c)
    assert simplex_max_radius(u) == pytest.approx(np.sqrt(2) / 3)
    rng = np.random.default_rng(2)
    y = sample_uniform("simplex", 200, rng)
    r, uu = simplex_log(y)
    np.testing.assert_allclose(simplex_exp(r, uu), y, atol=1e-12)


def test_radial_projection_examples():
    proj = radial_projection(np.array([0.5, 0.3, 0.2]))
    assert proj.r == pytest.approx(0.4)
    assert int(np.ravel(proj.face)[0]) == 2  # zero-based index of the smallest coordinate
    assert radial_projection(np.full(3, 1 / 3)).r == pytest.approx(0.0, abs=1e-15)
    near = radial_projection(np.array([0.6, 0.4 - 1e-9, 1e-9]))
    assert near.r == pytest.approx(1.0, abs=1e-8)


def test_shape_distance_examples():
    rng = np.random.default_rng(3)
    z = landmarks_to_shape(rng.normal(size=(2, 5)) + 1j * rng.normal(size=(2, 5)))
    assert shape_distance(z[0], z[0] * np.exp(0.7j)) == pytest.approx(0.0, abs=1e-7)
    e1, e2 = np.eye(4, dtype=complex)[:2]
    assert shape_distance(e1, e2) == pytest.approx(np.pi / 2)


def test_shape_triangle_inequality():
    rng = np.random.default_rng(4)
    a, b, c = (sample_uniform("shape", 1000, rng) for _ in range(3))
    assert np.all(shape_distance(a, c) <= shape_distance(a, b) + shape_distance(b, c) + 1e-12)


def test_canonical_phase_is_idempotent():
    rng = np.random.default_rng(5)
    z = rng.normal(size=(10, 4)) + 1j * rng.normal(size=(10, 4))
    w = canonical_phase(z)
    np.testing.assert_allclose(canonical_phase(w), w)
    assert np.all(w[:, 0].imag == 0) and np.all(w[:, 0].real > 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 3.1), st.floats(0.0, 2 * np.pi))
def test_sphere_distance_is_colatitude(r, phi):
    u = np.array([np.cos(phi), np.sin(phi), 0.0])
    assert sphere_distance(M, tangent_normal_compose(r, u, M)) == pytest.approx(r, abs=1e-12)


def test_median_trivial_cases():
    np.testing.assert_allclose(frechet_median(M[None]), M)
    x, y = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    np.testing.assert_allclose(frechet_median(np.stack([x, y])), normalize(x + y), atol=1e-8)
    with pytest.raises(AmbiguousMedian):
        frechet_median(np.stack([x, -x]))


def test_median_of_fisher_sample():
    mu = normalize(np.array([1.0, 2.0, 2.0]))
    x = sample_fisher(FisherModel(mu, 10.0), 100_000, 6)
    assert sphere_distance(frechet_median(x), mu) <= 0.02


def test_median_of_density_and_uniform_flag():
    mu = normalize(np.array([0.0, 1.0, 1.0]))
    model = FisherModel(mu, 4.0)
    med = frechet_median(density=model.density, p=3)
    assert sphere_distance(med, mu) <= 1e-4
    flag = frechet_median(density=lambda x: np.ones(len(x)), p=3)
    assert isinstance(flag, UniformFlag)
