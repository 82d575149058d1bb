import numpy as np
import pytest
from scipy.stats import multivariate_normal

from pismle.kalman import (
    ConvergenceError,
    NotLinearGaussianError,
    kalman_conditional_score,
    kalman_filter_states,
    kalman_loglik,
    kalman_mle,
    kalman_score,
    kalman_terms,
)
from pismle.models import InvalidParameterError, Series, get_model
from pismle.rng import stream


def joint_gaussian_loglik(theta, y, init_mean):
    """Reference: y_{0:T} is jointly Gaussian with an explicit covariance."""
    phi, sx, sy = theta["phi"], theta["sigma_x"], theta["sigma_y"]
    n = len(y.y)
    tau2 = sx * sx / (1.0 - phi * phi)
    idx = np.arange(n)
    cov_x = tau2 * phi ** np.abs(idx[:, None] - idx[None, :])
    cov = cov_x + sy * sy * np.eye(n)
    mean = init_mean * phi**idx
    return multivariate_normal(mean=mean, cov=cov).logpdf(y.y)


@pytest.mark.parametrize("model_id", ["ar1", "ar1-trend"])
def test_loglik_matches_joint_gaussian(model_id):
    model = get_model(model_id)
    rng = np.random.default_rng(3)
    for case in range(5):
        theta = model.parameter(
            [rng.uniform(-0.9, 0.9), rng.uniform(0.3, 1.2), rng.uniform(0.3, 1.2)]
        )
        y = model.simulate(theta, 20, stream(case, "kal", model_id))
        got = kalman_loglik(theta, y, model)
        want = joint_gaussian_loglik(theta, y, model.init_mean)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-9)


def test_loglik_frozen_value(ar1):
    # Derived once from the closed-form joint-Gaussian density and frozen.
    theta = ar1.parameter([0.7, 0.7, 1.0])
    y = Series(np.array([0.5, -0.3, 1.1, 0.2]))
    assert kalman_loglik(theta, y, ar1) == pytest.approx(
        -5.31420396148243, abs=1e-12
    )


def test_terms_sum_to_loglik(ar1, theta_ar1, y_short):
    terms = kalman_terms(theta_ar1, y_short, ar1)
    assert terms.shape == (31,)
    assert np.sum(terms) == pytest.approx(kalman_loglik(theta_ar1, y_short, ar1))


def test_rejects_nonlinear_models(y_short):
    sv = get_model("sv")
    theta = sv.parameter([0.7, 0.7, 1.0])
    with pytest.raises(NotLinearGaussianError):
        kalman_loglik(theta, y_short, sv)
    with pytest.raises(NotLinearGaussianError):
        kalman_score(theta, y_short, sv)


def test_score_matches_fd_of_loglik(ar1, theta_ar1, y_short):
    g = kalman_score(theta_ar1, y_short, ar1)
    h = 1e-5
    for i in range(3):
        vp, vm = theta_ar1.values.copy(), theta_ar1.values.copy()
        vp[i] += h
        vm[i] -= h
        fd = (
            kalman_loglik(theta_ar1.replace(vp), y_short, ar1)
            - kalman_loglik(theta_ar1.replace(vm), y_short, ar1)
        ) / (2.0 * h)
        assert g[i] == pytest.approx(fd, rel=1e-4, abs=1e-4)


def test_score_rejects_boundary_parameters(ar1, y_short):
    with pytest.raises(InvalidParameterError):
        kalman_score(ar1.parameter([1.0 - 1e-8, 0.7, 1.0]), y_short, ar1)


def test_conditional_scores_sum_to_score(ar1, theta_ar1, y_tiny):
    total = sum(
        kalman_conditional_score(theta_ar1, y_tiny, t, ar1)
        for t in range(y_tiny.T + 1)
    )
    np.testing.assert_allclose(
        total, kalman_score(theta_ar1, y_tiny, ar1), rtol=1e-5, atol=1e-4
    )
    with pytest.raises(ValueError):
        kalman_conditional_score(theta_ar1, y_tiny, 99, ar1)


def test_mle_reaches_stationary_point(ar1):
    theta_star = ar1.parameter([0.7, 0.7, 1.0])
    y = ar1.simulate(theta_star, 300, stream(11, "mle"))
    theta_hat = kalman_mle(ar1.parameter([0.5, 0.5, 0.8]), y, ar1)
    ll_hat = kalman_loglik(theta_hat, y, ar1)
    g = kalman_score(theta_hat, y, ar1)
    assert np.linalg.norm(g) <= 1e-5 * (1.0 + abs(ll_hat))
    # the fit cannot be worse than the truth
    assert ll_hat >= kalman_loglik(theta_star, y, ar1) - 1e-9


def test_mle_nonconvergence_reports_best(ar1, y_short):
    with pytest.raises(ConvergenceError) as exc:
        kalman_mle(ar1.parameter([0.5, 0.5, 0.8]), y_short, ar1, max_iter=2)
    assert exc.value.best is not None


def test_filter_states_progression(ar1, theta_ar1, y_short):
    states = kalman_filter_states(theta_ar1, y_short, ar1)
    assert len(states) == len(y_short.y)
    assert states[0].loglik == 0.0
    assert states[-1].loglik == pytest.approx(
        np.sum(kalman_terms(theta_ar1, y_short, ar1)[:-1])
    )
    assert all(s.variance > 0 for s in states)
