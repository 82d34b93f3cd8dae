import numpy as np
import pytest
from scipy import integrate, optimize, special, stats

from manifold_pit.errors import DomainError
from manifold_pit.geometry import landmarks_to_shape, normalize, shape_distance
from manifold_pit.models import (
    AcgModel,
    DirichletModel,
    FisherModel,
    LogNormalRadialModel,
    MardiaDrydenModel,
    MatrixFisherModel,
    ProjectedNormalModel,
    TangentGaussianModel,
    regular_polygon,
    sample,
    sample_halfplane_reference,
    sample_uniform,
)
from manifold_pit.transforms import IdentityTransform, build_transform, pit_halfplane
from manifold_pit.transforms.rotation import matrix_fisher_angle_map
from manifold_pit.transforms.shape import md_cdf, md_uniform_cdf
from manifold_pit.transforms.sphere import (
    acg_standard_map,
    acg_u,
    fisher_t,
    fisher_u,
    fisher_u_approx,
    pit_rotsym,
    uniform_t_cdf,
)
from manifold_pit.numerics import MonotoneCdf
from manifold_pit.uniformity import dirichlet_score_test, rayleigh_test

MU5 = landmarks_to_shape(regular_polygon(5)[None])[0]


# --- sphere ---------------------------------------------------------------

def test_fisher_u_examples():
    t = np.linspace(-1, 1, 11)
    np.testing.assert_array_equal(fisher_u(t, 0.0), t)
    e = np.e
    ref = (2 * e - e**2 - e**-2) / (e**2 - e**-2)
    assert fisher_u(0.5, 2.0) == pytest.approx(ref, abs=1e-14)
    assert ref == pytest.approx(-0.28783, abs=1e-5)
    assert fisher_u(1.0, 5.0) == pytest.approx(1.0)
    assert fisher_u(-1.0, 5.0) == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        fisher_u(0.2, -1.0)


def test_fisher_u_no_overflow_at_large_kappa():
    u = fisher_u(np.linspace(-1, 1, 101), 5000.0)
    assert np.all(np.isfinite(u)) and np.all(np.diff(u) >= 0)


def test_fisher_t_inverts_fisher_u():
    t = np.linspace(-1, 1, 201)
    for k in (0.5, 10.0, 300.0):
        u = fisher_u(t, k)
        np.testing.assert_allclose(fisher_u(fisher_t(u, k), k), u, atol=1e-12)


def test_fisher_approx_error_is_exponentially_small():
    t = np.linspace(0, 1, 1001)
    for k in (5.0, 10.0, 20.0):
        err = np.max(np.abs(fisher_u(t, k) - fisher_u_approx(t, k)))
        # the exact and approximate maps differ by at most 2 e^{-2 kappa}, plus rounding
        assert err <= 2 * np.exp(-2 * k) * 1.0001 + 4e-16
    assert np.max(np.abs(fisher_u(t, 10.0) - fisher_u_approx(t, 10.0))) <= 1e-3


def test_pit_rotsym_matches_closed_form():
    mu = normalize(np.array([1.0, 2.0, -0.5]))
    kappa = 10.0
    G_mu = MonotoneCdf(lambda t: np.expm1(kappa * (np.asarray(t) + 1)) / np.expm1(2 * kappa), upper=1.0, lower=-1.0)
    x = sample(FisherModel(mu, kappa), 500, 0)
    got = pit_rotsym(G_mu, uniform_t_cdf(3), mu, x)
    np.testing.assert_allclose(got, build_transform(FisherModel(mu, kappa)).forward(x), atol=1e-6)


def test_rotsym_keeps_tangential_direction():
    mu = normalize(np.array([0.3, -0.4, 0.8]))
    T = build_transform(FisherModel(mu, 4.0))
    x = sample_uniform("sphere", 200, 1)
    P = np.eye(3) - np.outer(mu, mu)
    a, b = x @ P, T.forward(x) @ P
    cos = np.sum(normalize(a) * normalize(b), axis=1)
    np.testing.assert_allclose(cos, 1.0, atol=1e-12)


def test_fisher_general_dimension_matches_beta_law():
    mu = np.array([0, 0, 0, 1.0])
    T = build_transform(FisherModel(mu, 3.0))
    y = T.forward(sample_fisher_s3(mu, 3.0, 20_000, 2))
    t = y @ mu
    # t = x.mu under the uniform law on S^3 has density prop. to (1 - t^2)^{1/2}
    cdf = lambda v: special.betainc(1.5, 1.5, (v + 1) / 2)
    assert stats.kstest(t, cdf).pvalue > 1e-3


def sample_fisher_s3(mu, kappa, n, seed):
    # rejection from the uniform law, independent of the package sampler
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(o) for o in out) < n:
        x = normalize(rng.standard_normal((4 * n, 4)))
        keep = rng.random(4 * n) < np.exp(kappa * (x @ mu - 1))
        out.append(x[keep])
    return np.concatenate(out)[:n]


def test_acg_closed_form_examples():
    t = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(acg_u(t, 1.0), t)
    assert acg_u(0.5, 4.0) == pytest.approx(0.5 / np.sqrt(3.25), abs=1e-14)
    assert acg_u(0.5, 4.0) == pytest.approx(0.27735, abs=1e-5)
    assert acg_u(1.0, 4.0) == pytest.approx(1.0)


def test_acg_two_eigenvalues_coincides_with_standard_map():
    A = np.diag([1.0, 1.0, 4.0])
    T = build_transform(AcgModel(A))
    x = sample_uniform("projective", 1000, 3)
    got = T.forward(x)
    ref = acg_standard_map(A, x)
    err = np.minimum(np.linalg.norm(got - ref, axis=1), np.linalg.norm(got + ref, axis=1))
    assert np.max(err) <= 1e-10


def test_projected_normal_pushforward():
    model = ProjectedNormalModel(np.array([0.0, 1.0, 2.0]))
    y = build_transform(model).forward(sample(model, 10_000, 4))
    assert rayleigh_test(y).p_value > 1e-3


def test_identity_cases():
    x = sample_uniform("sphere", 10, 5)
    assert isinstance(build_transform(FisherModel(x[0], 0.0)), IdentityTransform)
    assert isinstance(build_transform(ProjectedNormalModel(np.zeros(3))), IdentityTransform)
    np.testing.assert_array_equal(build_transform(FisherModel(x[0], 0.0)).forward(x), x)


# --- rotations --------------------------------------------------------------

def test_matrix_fisher_angle_map_trapezoid_oracle():
    assert matrix_fisher_angle_map(np.pi, 2.0) == pytest.approx(np.pi)
    np.testing.assert_allclose(matrix_fisher_angle_map(np.array([0.4, 1.1]), 0.0), [0.4, 1.1])
    kappa = 2.0
    w = np.linspace(0, np.pi, 400_001)
    f = np.exp(4 * kappa * np.cos(w / 2) ** 2) * np.sin(w / 2) ** 2
    cum = integrate.cumulative_trapezoid(f, w, initial=0.0)
    level = np.interp(np.pi / 2, w, cum) / cum[-1]
    ref = optimize.brentq(lambda v: (v - np.sin(v)) / np.pi - level, 0, np.pi, xtol=1e-15)
    assert matrix_fisher_angle_map(np.pi / 2, kappa) == pytest.approx(ref, abs=1e-7)


# --- shapes -----------------------------------------------------------------

def test_md_cdf_examples():
    assert md_uniform_cdf(0.5, 5) == pytest.approx(0.875)
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(md_cdf(x, 0.0, 5), md_uniform_cdf(x, 5))
    k, kappa = 5, 3.0
    f = lambda s: (k - 2) * (1 - s) ** (k - 3) * np.exp(-kappa * (1 - s)) * special.eval_laguerre(k - 2, -kappa * s)
    ref, _ = integrate.quad(f, 0, 0.6, epsabs=1e-13, epsrel=1e-13)
    assert md_cdf(0.6, kappa, k) == pytest.approx(ref, abs=1e-7)


def test_md_zero_kappa_is_identity_on_shapes():
    z = sample_uniform("shape", 50, 6)
    T = build_transform(MardiaDrydenModel(MU5, 0.0, 5))
    assert np.max(shape_distance(T.forward(z), z)) <= 1e-7


# --- simplex ----------------------------------------------------------------

@pytest.mark.parametrize("method", ["radial", "exp"])
def test_simplex_uniform_is_identity(method):
    y = sample_uniform("simplex", 1000, 7)
    T = build_transform(DirichletModel(np.ones(3)), method=method)
    assert np.max(np.abs(T.forward(y) - y)) <= 1e-12
    assert np.max(np.abs(T.inverse(y) - y)) <= 1e-12


@pytest.mark.parametrize("method", ["radial", "exp"])
def test_simplex_dirichlet_pushforward(method):
    model = DirichletModel(np.array([2.0, 1.0, 1.0]))
    y = build_transform(model, method=method).forward(sample(model, 10_000, 8))
    assert dirichlet_score_test(y).p_value > 1e-3


def test_simplex_exp_unsupported_dimension():
    with pytest.raises(DomainError):
        build_transform(DirichletModel(np.ones(4) * 2), method="exp")


def test_simplex_radial_preserves_rays():
    model = DirichletModel(np.array([2.0, 1.0, 1.0]))
    T = build_transform(model)
    q = T.centre
    rng = np.random.default_rng(9)
    u = normalize(rng.normal(size=3) - rng.normal(size=3).mean())
    u = normalize(u - u.mean())
    # points on one ray from the balanced centre stay on one ray from the centroid
    rmax = 1.0 / (3 * np.max(-u / q))
    ys = q + np.outer(np.linspace(0.05, 0.95, 7) * rmax, u) * 1.0
    out = T.forward(ys) - 1 / 3
    dirs = normalize(out)
    np.testing.assert_allclose(dirs, np.broadcast_to(dirs[0], dirs.shape), atol=1e-8)


# --- half-plane -------------------------------------------------------------

def test_halfplane_reference_is_identity():
    x = sample_halfplane_reference(200, 10)
    T = build_transform(TangentGaussianModel())
    np.testing.assert_allclose(T.forward(x), x, atol=1e-12)


def test_lognormal_radial_coordinates_are_gaussian():
    model = LogNormalRadialModel(0.3, 0.4)
    v = build_transform(model).to_tangent(pit_halfplane(model, sample(model, 5000, 11)))
    for j in range(2):
        assert stats.kstest(v[:, j], "norm").pvalue > 1e-3


def test_tangent_gaussian_keeps_geodesic_rays():
    model = TangentGaussianModel(np.array([[1.0, 0.4], [0.4, 2.0]]))
    T = build_transform(model)
    d = np.array([np.cos(0.7), np.sin(0.7)])
    v = np.outer([0.2, 0.8, 1.5, 3.0], d)
    w = T.to_tangent(T.forward(T.from_tangent(v)))
    ang = np.arctan2(w[:, 1], w[:, 0])
    np.testing.assert_allclose(ang, ang[0], atol=1e-10)
    assert np.all(np.diff(np.hypot(w[:, 0], w[:, 1])) > 0)


# --- round trips ------------------------------------------------------------

ROUND_TRIP = {
    "fisher": (FisherModel(normalize(np.array([1.0, 1.0, 1.0])), 10.0), "sphere"),
    "fisher_s3": (FisherModel(np.array([0, 0, 0, 1.0]), 2.0), "sphere4"),
    "pn": (ProjectedNormalModel(np.array([0.0, 0.0, 2.6])), "sphere"),
    "acg2": (AcgModel(np.diag([1.0, 1.0, 4.0])), "projective"),
    "acg3": (AcgModel(np.diag([1.0, 2.0, 4.0])), "projective"),
    "matrix_fisher": (MatrixFisherModel(np.eye(3), 2.0), "rotation"),
    "md": (MardiaDrydenModel(MU5, 0.125, 5), "shape"),
    "dirichlet_radial": (DirichletModel(np.array([2.0, 1.0, 1.0])), "simplex"),
    "dirichlet_exp": (DirichletModel(np.array([2.0, 1.0, 1.0])), "simplex"),
    "tangent_gaussian": (TangentGaussianModel(np.array([[1.0, 0.3], [0.3, 2.0]])), "halfplane"),
    "lognormal": (LogNormalRadialModel(0.0, 0.5), "halfplane"),
}


def round_trip_error(name, n=1000, seed=12):
    model, space = ROUND_TRIP[name]
    T = build_transform(model, method="exp" if name == "dirichlet_exp" else "default")
    if space == "halfplane":
        x = sample(model, n, seed)
    elif space == "sphere4":
        x = sample_uniform("sphere", n, seed, p=4)
    else:
        x = sample_uniform(space, n, seed)
    back = T.inverse(T.forward(x))
    if space == "projective":
        return np.max(np.minimum(np.linalg.norm(back - x, axis=1), np.linalg.norm(back + x, axis=1)))
    if space == "shape":
        return np.max(shape_distance(back, x))
    if space == "rotation":
        return np.max(np.abs(back - x))
    if space == "halfplane":
        return np.max(np.abs(back - x) / x[:, 1:])
    return np.max(np.abs(back - x))


@pytest.mark.parametrize("name", sorted(ROUND_TRIP))
def test_round_trip(name):
    assert round_trip_error(name) <= 1e-9
