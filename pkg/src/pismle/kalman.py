"""Exact likelihood oracle for the linear-Gaussian models.

Scalar Kalman filter for ``ar1`` and ``ar1-trend`` (the latter in the
shifted coordinate where the trend becomes an initial mean of 3).  Provides
the exact log-likelihood, finite-difference score and conditional score,
and a deterministic gradient-ascent MLE used as ground truth by the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    InvalidParameterError,
    Parameter,
    Series,
    StateSpaceModel,
    _log_normal_pdf,
)

FD_STEP = 1e-6


class NotLinearGaussianError(TypeError):
    """Kalman routines only apply to the linear-Gaussian models."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def _check_model(model: StateSpaceModel) -> None:
    if not model.linear_gaussian:
        raise NotLinearGaussianError(
            f"model {model.model_id!r} is not linear-Gaussian"
        )


def kalman_terms(theta: Parameter, y: Series, model: StateSpaceModel) -> np.ndarray:
    """Per-step conditional log-likelihood terms log p(y_t | y_{0:t-1})."""
    _check_model(model)
    model.validate(theta)
    phi, sx, sy = theta["phi"], theta["sigma_x"], theta["sigma_y"]
    sx2, sy2 = sx * sx, sy * sy
    m = model.init_mean
    P = sx2 / (1.0 - phi * phi)
    terms = np.empty(len(y.y))
    for t, obs in enumerate(y.y):
        if t > 0:
            m = phi * m
            P = phi * phi * P + sx2
        S = P + sy2
        terms[t] = _log_normal_pdf(obs, m, S)
        K = P / S
        m = m + K * (obs - m)
        P = (1.0 - K) * P
    return terms


def kalman_loglik(theta: Parameter, y: Series, model: StateSpaceModel) -> float:
    """Exact log p(y_{0:T}) for the linear-Gaussian models."""
    return float(np.sum(kalman_terms(theta, y, model)))


def _fd_gradient(fun, values, h):
    grad = np.empty(len(values))
    for i in range(len(values)):
        vp, vm = values.copy(), values.copy()
        vp[i] += h
        vm[i] -= h
        grad[i] = (fun(vp) - fun(vm)) / (2.0 * h)
    return grad


def _require_interior(theta: Parameter, model: StateSpaceModel, h: float) -> None:
    for delta in (h, -h):
        for i in range(theta.p):
            v = theta.values.copy()
            v[i] += delta
            if not model.is_valid(theta.replace(v)):
                raise InvalidParameterError(
                    f"parameter within {h} of the domain boundary: {theta}"
                )


def kalman_score(
    theta: Parameter, y: Series, model: StateSpaceModel, h: float = FD_STEP
) -> np.ndarray:
    """Central finite-difference gradient of :func:`kalman_loglik`."""
    _check_model(model)
    model.validate(theta)
    _require_interior(theta, model, h)
    return _fd_gradient(
        lambda v: kalman_loglik(theta.replace(v), y, model), theta.values, h
    )


def kalman_conditional_score(
    theta: Parameter, y: Series, t: int, model: StateSpaceModel, h: float = FD_STEP
) -> np.ndarray:
    """Finite-difference gradient of log p(y_t | y_{0:t-1})."""
    _check_model(model)
    model.validate(theta)
    if not 0 <= t <= y.T:
        raise ValueError(f"t={t} outside series range [0, {y.T}]")
    _require_interior(theta, model, h)
    return _fd_gradient(
        lambda v: kalman_terms(theta.replace(v), y, model)[t], theta.values, h
    )


def kalman_mle(
    theta0: Parameter,
    y: Series,
    model: StateSpaceModel,
    gtol: float = 1e-6,
    max_iter: int = 10_000,
) -> Parameter:
    """Deterministic gradient ascent with backtracking line search.

    Stops when the finite-difference gradient norm falls below
    ``gtol * (1 + |loglik|)`` (the FD noise floor scales with the
    log-likelihood magnitude) or when the line search can no longer
    find an ascent direction.
    """
    _check_model(model)
    model.validate(theta0)
    v = theta0.values.copy()
    ll = kalman_loglik(theta0.replace(v), y, model)
    step = 1e-3
    for _ in range(max_iter):
        g = kalman_score(theta0.replace(v), y, model)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= gtol * (1.0 + abs(ll)):
            return theta0.replace(v)
        # backtrack until a valid ascent point is found
        s = step
        while s > 1e-16:
            cand = v + s * g
            if model.is_valid(theta0.replace(cand)):
                ll_cand = kalman_loglik(theta0.replace(cand), y, model)
                if ll_cand > ll:
                    break
            s *= 0.5
        else:
            # no ascent possible at any step: treat as converged at a
            # stationary point up to FD noise
            return theta0.replace(v)
        v, ll = cand, ll_cand
        step = min(s * 2.0, 1.0)
    raise ConvergenceError(
        f"kalman_mle did not converge in {max_iter} iterations",
        best=theta0.replace(v),
    )


@dataclass
class KalmanState:
    """Filter summary at one time index (used by diagnostics)."""

    mean: float
    variance: float
    loglik: float
    t: int


def kalman_filter_states(theta, y, model):
    """Predictive means/variances alongside the accumulated log-likelihood."""
    _check_model(model)
    model.validate(theta)
    phi, sx, sy = theta["phi"], theta["sigma_x"], theta["sigma_y"]
    sx2, sy2 = sx * sx, sy * sy
    m = model.init_mean
    P = sx2 / (1.0 - phi * phi)
    out = []
    ll = 0.0
    for t, obs in enumerate(y.y):
        if t > 0:
            m = phi * m
            P = phi * phi * P + sx2
        out.append(KalmanState(mean=m, variance=P, loglik=ll, t=t))
        S = P + sy2
        ll += _log_normal_pdf(obs, m, S)
        K = P / S
        m = m + K * (obs - m)
        P = (1.0 - K) * P
    return out
