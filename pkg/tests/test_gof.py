import numpy as np
import pytest
from scipy import stats

from manifold_pit.errors import DomainError
from manifold_pit.gof import GofConfig, bootstrap_statistics, fisher_battery, fitted_images, gof_fitted, gof_fixed
from manifold_pit.models import (
    DirichletModel,
    FisherModel,
    MardiaDrydenModel,
    MatrixFisherModel,
    TangentGaussianModel,
    regular_polygon,
    sample,
    sample_fisher,
)
from manifold_pit.geometry import landmarks_to_shape, normalize
from manifold_pit.transforms.sphere import fisher_u, fisher_u_approx
from manifold_pit.uniformity import STATISTICS

MU = normalize(np.array([0.2, -0.5, 1.0]))
MU5 = landmarks_to_shape(regular_polygon(5)[None])[0]


def test_gof_fixed_defaults_per_space():
    cases = [
        (FisherModel(MU, 10.0), "chi2(3)"),
        (DirichletModel(np.array([2.0, 1.0, 1.0])), "chi2(3)"),
        (MatrixFisherModel(np.eye(3), 2.0), "chi2(9)"),
        (MardiaDrydenModel(MU5, 0.125, 5), "chi2(15)"),
        (TangentGaussianModel(), "chi2(5)"),
    ]
    for model, ref in cases:
        rep = gof_fixed(sample(model, 500, 1), model)
        assert rep.reference == ref
        assert rep.p_value > 1e-3


def test_gof_fixed_detects_wrong_model():
    x = sample(FisherModel(MU, 10.0), 200, 2)
    assert gof_fixed(x, FisherModel(MU, 3.0)).p_value < 1e-6


def test_fixed_model_p_values_are_uniform():
    model = FisherModel(MU, 10.0)
    x = sample_fisher(model, 10_000 * 50, 3).reshape(10_000, 50, 3)
    from manifold_pit.transforms import build_transform

    y = build_transform(model).forward(x.reshape(-1, 3)).reshape(x.shape)
    p = stats.chi2.sf(STATISTICS["rayleigh"](y), 3)
    assert stats.kstest(p, "uniform").statistic <= 0.02
    assert abs(np.mean(p <= 0.05) - 0.05) <= 0.015


def test_gof_config_validation():
    with pytest.raises(DomainError):
        GofConfig("rayleigh", model=FisherModel(MU, 1.0), family="fisher")
    with pytest.raises(DomainError):
        GofConfig("rayleigh", family="fisher", B=-1)


def test_fitted_images_match_single_sample_path():
    x = sample_fisher(FisherModel(MU, 5.0), 3 * 40, 4).reshape(3, 40, 3)
    imgs, (mu, kappa) = fitted_images("fisher", x)
    from manifold_pit.transforms import build_transform

    for r in range(3):
        np.testing.assert_allclose(imgs[r], build_transform(FisherModel(mu[r], kappa[r])).forward(x[r]), atol=1e-12)
    with pytest.raises(DomainError):
        fitted_images("acg", x)


def test_gof_fitted_reference_tags():
    x = sample_fisher(FisherModel(MU, 10.0), 50, 5)
    assert "anti-conservative" in gof_fitted(x, "fisher").reference
    rep = gof_fitted(x, "fisher", B=50, seed=1)
    assert rep.reference == "parametric bootstrap (B=50)"
    assert 1 / 51 <= rep.p_value <= 1.0
    assert gof_fitted(x, "fisher", B=50, seed=1) == rep


def test_bootstrap_statistics_are_deterministic():
    model = MardiaDrydenModel(MU5, 0.5, 5)
    a = bootstrap_statistics("md", model, 30, "mardia_shape", 20, seed=6)
    b = bootstrap_statistics("md", model, 30, "mardia_shape", 20, seed=6)
    np.testing.assert_array_equal(a, b)


def test_fisher_battery_reports():
    model = FisherModel(MU, 10.0)
    reps = fisher_battery(sample_fisher(model, 200, 7), model)
    assert len(reps) == 3
    assert all(r.p_value > 1e-3 for r in reps)
    with pytest.raises(DomainError):
        fisher_battery(sample_fisher(model, 20, 8), FisherModel(MU, 0.0), use_approx=True)


def test_battery_approximation_is_close():
    t = np.linspace(0, 1, 2001)
    assert np.max(np.abs(fisher_u(t, 10.0) - fisher_u_approx(t, 10.0))) <= 1e-3


@pytest.mark.slow
def test_battery_size_under_the_model():
    model = FisherModel(MU, 10.0)
    reps = 10_000
    x = sample_fisher(model, reps * 50, 9).reshape(reps, 50, 3)
    rej = np.zeros(3)
    for i in range(reps):
        rej += [r.p_value <= 0.05 for r in fisher_battery(x[i], model, seed=i)]
    assert np.all(np.abs(rej / reps - 0.05) <= 0.015), rej / reps
