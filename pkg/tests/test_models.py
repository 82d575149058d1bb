import numpy as np
import pytest

from pismle.models import (
    MODEL_IDS,
    InvalidParameterError,
    Parameter,
    Series,
    get_model,
    load_series,
    save_series,
)
from pismle.rng import stream

from conftest import random_theta


def direct_log_joint(model, theta, z, y):
    """Reference log p(x_{0:t}, y_{0:t}) computed term by term from the
    latent path (in the shifted coordinate) -- no sufficient statistics."""
    from pismle.models import LOG2PI

    tau2 = model._stationary_var(theta)
    if model.model_id == "par1":
        mu = theta.values[:6]
        phi, sx = theta["phi"], theta["sigma_x"]
        m0 = model.cov(0) @ mu
    else:
        phi, sx = theta["phi"], theta["sigma_x"]
        m0 = model.init_mean
    total = -0.5 * (LOG2PI + np.log(tau2)) - (z[0] - m0) ** 2 / (2.0 * tau2)
    for t in range(1, len(z)):
        if model.model_id == "par1":
            drift = (model.cov(t) - phi * model.cov(t - 1)) @ mu
        else:
            drift = 0.0
        total += (
            -0.5 * (LOG2PI + 2.0 * np.log(sx))
            - (z[t] - phi * z[t - 1] - drift) ** 2 / (2.0 * sx * sx)
        )
    for t in range(len(z)):
        total += float(np.asarray(model.log_obs(theta, z[t], y[t])))
    return total


def path_stats(model, series):
    stats = model.init_stats(np.array([series.x[0]]), series.y[0])
    for t in range(1, len(series.y)):
        stats = model.update_stats(
            stats, np.array([series.x[t - 1]]), np.array([series.x[t]]), series.y[t]
        )
    return stats


@pytest.mark.parametrize("model_id", MODEL_IDS)
def test_log_joint_matches_direct_path_evaluation(model_id):
    model = get_model(model_id)
    rng = np.random.default_rng(7)
    for case in range(10):
        theta = random_theta(model, rng)
        series = model.simulate(theta, 15, stream(case, "sim", model_id))
        stats = path_stats(model, series)
        got = float(model.log_joint(theta, stats)[0])
        want = direct_log_joint(model, theta, series.x, series.y)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-9)


@pytest.mark.parametrize("model_id", MODEL_IDS)
def test_log_joint_evaluable_at_other_parameters(model_id):
    # The sufficient statistics must support evaluation away from the
    # generating parameter (this is what ratio reweighting relies on).
    model = get_model(model_id)
    rng = np.random.default_rng(8)
    theta_gen = random_theta(model, rng)
    theta_eval = random_theta(model, rng)
    series = model.simulate(theta_gen, 12, stream(0, "sim2", model_id))
    stats = path_stats(model, series)
    got = float(model.log_joint(theta_eval, stats)[0])
    want = direct_log_joint(model, theta_eval, series.x, series.y)
    assert got == pytest.approx(want, rel=1e-10, abs=1e-9)


@pytest.mark.parametrize("model_id", MODEL_IDS)
def test_grad_log_joint_matches_finite_differences(model_id):
    model = get_model(model_id)
    rng = np.random.default_rng(9)
    theta = random_theta(model, rng)
    series = model.simulate(theta, 10, stream(1, "simg", model_id))
    stats = path_stats(model, series)
    grad = model.grad_log_joint(theta, stats)[0]
    h = 1e-6
    for i in range(theta.p):
        vp, vm = theta.values.copy(), theta.values.copy()
        vp[i] += h
        vm[i] -= h
        fd = (
            float(model.log_joint(theta.replace(vp), stats)[0])
            - float(model.log_joint(theta.replace(vm), stats)[0])
        ) / (2.0 * h)
        assert grad[i] == pytest.approx(fd, rel=5e-5, abs=1e-6)


def test_parameter_accessors():
    theta = Parameter(np.array([0.5, 0.6, 0.7]), ("phi", "sigma_x", "sigma_y"))
    assert theta.p == 3
    assert theta["sigma_x"] == 0.6
    new = theta.replace([0.1, 0.2, 0.3])
    assert new["phi"] == 0.1 and theta["phi"] == 0.5
    with pytest.raises(ValueError):
        Parameter(np.array([1.0]), ("a", "b"))


def test_validation_rejects_boundary_parameters(ar1):
    with pytest.raises(InvalidParameterError):
        ar1.validate(ar1.parameter([1.0, 0.7, 1.0]))
    with pytest.raises(InvalidParameterError):
        ar1.validate(ar1.parameter([0.5, 0.0, 1.0]))
    with pytest.raises(InvalidParameterError):
        ar1.validate(ar1.parameter([0.5, 0.7, -1.0]))
    with pytest.raises(InvalidParameterError):
        ar1.validate(ar1.parameter([np.nan, 0.7, 1.0]))
    assert ar1.is_valid(ar1.parameter([0.5, 0.7, 1.0]))


def test_par1_validation():
    model = get_model("par1")
    good = np.concatenate([np.zeros(6), [0.5, 0.5]])
    model.validate(model.parameter(good))
    bad = good.copy()
    bad[6] = 1.0
    with pytest.raises(InvalidParameterError):
        model.validate(model.parameter(bad))


def test_registry():
    assert set(MODEL_IDS) == {"ar1", "ar1-trend", "sv", "sv-trend", "par1"}
    with pytest.raises(ValueError):
        get_model("arma")


def test_optimal_proposal_only_for_linear_gaussian():
    get_model("ar1", "optimal")
    get_model("ar1-trend", "optimal")
    with pytest.raises(InvalidParameterError):
        get_model("sv", "optimal")
    with pytest.raises(InvalidParameterError):
        get_model("par1", "optimal")
    with pytest.raises(ValueError):
        get_model("ar1", "systematic")


def test_optimal_proposal_reduces_to_bootstrap_for_huge_obs_noise():
    # With sigma_y -> infinity the observation carries no information and the
    # fully adapted proposal moments collapse to the transition's.
    model = get_model("ar1", "optimal")
    theta = model.parameter([0.7, 0.7, 1e6])
    x_prev = np.array([0.3])
    phi, sx = 0.7, 0.7
    sx2, sy2 = sx * sx, 1e12
    v = 1.0 / (1.0 / sx2 + 1.0 / sy2)
    m = v * (phi * x_prev / sx2 + 1.5 / sy2)
    assert v == pytest.approx(sx2, rel=1e-6)
    assert m[0] == pytest.approx(phi * x_prev[0], abs=1e-6)


def test_trend_models_shift_initial_mean():
    assert get_model("ar1").init_mean == 0.0
    assert get_model("ar1-trend").init_mean == 3.0
    assert get_model("sv").init_mean == 0.0
    assert get_model("sv-trend").init_mean == 8.0


def test_simulate_shapes_and_types(ar1, theta_ar1):
    s = ar1.simulate(theta_ar1, 25, stream(0, "shape"))
    assert s.y.shape == (26,) and s.x.shape == (26,)
    assert s.T == 25
    with pytest.raises(ValueError):
        ar1.simulate(theta_ar1, -1, stream(0, "shape"))


def test_par1_observations_are_counts():
    model = get_model("par1")
    theta = model.parameter(np.concatenate([np.full(6, 0.1), [0.5, 0.3]]))
    s = model.simulate(theta, 40, stream(3, "counts"))
    assert np.all(s.y >= 0)
    assert np.all(s.y == np.round(s.y))


def test_series_roundtrip(tmp_path, ar1, theta_ar1):
    s = ar1.simulate(theta_ar1, 12, stream(5, "io"))
    path = tmp_path / "y.csv"
    save_series(path, s)
    back = load_series(path)
    np.testing.assert_array_equal(back.y, s.y)
    np.testing.assert_array_equal(back.x, s.x)
    save_series(path, Series(s.y))
    assert load_series(path).x is None


def test_series_validation():
    with pytest.raises(ValueError):
        Series(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        Series(np.zeros(3), np.zeros(4))


def test_stats_have_fixed_dimension(ar1, theta_ar1):
    # The accumulator never grows with the path length.
    s = ar1.simulate(theta_ar1, 50, stream(6, "dim"))
    stats = path_stats(ar1, s)
    assert stats.shape == (1, ar1.stat_dim)
    assert get_model("par1").stat_dim == 33
