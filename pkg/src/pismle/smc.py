"""Particle machinery: propagation, weighting, ESS, multinomial resampling,
likelihood estimation, and the Fisher-identity score estimator.

All weight handling is in the log domain; nothing exponentiates an
unnormalized log-weight without max-subtraction.  Particles carry the
fixed-dimension sufficient statistics of their path, so score estimators
never need the ancestral paths themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .models import Parameter, Series, StateSpaceModel
from .rng import stream


class DegenerateCloudError(RuntimeError):
    """All particle weights vanished (impossible observation or nan)."""


def logmeanexp(logw: np.ndarray) -> float:
    m = np.max(logw)
    if not np.isfinite(m):
        raise DegenerateCloudError("all log-weights are -inf or nan")
    return float(m + np.log(np.mean(np.exp(logw - m))))


def ess(logw: np.ndarray) -> float:
    """Effective sample size 1 / sum(normalized weights squared)."""
    logw = np.asarray(logw, dtype=float)
    m = np.max(logw)
    if not np.isfinite(m):
        raise DegenerateCloudError("all log-weights are -inf or nan")
    w = np.exp(logw - m)
    s = w.sum()
    return float(s * s / np.sum(w * w))


def normalized_weights(logw: np.ndarray) -> np.ndarray:
    m = np.max(logw)
    if not np.isfinite(m):
        raise DegenerateCloudError("all log-weights are -inf or nan")
    w = np.exp(logw - m)
    return w / w.sum()


@dataclass
class ParticleCloud:
    """Weighted particle set at one time index.

    ``theta_gen`` records the parameter under which the current target is
    expressed (updated by retargeting).  ``loglik_closed`` accumulates the
    log of the mean-weight segments closed at past resampling times.
    """

    model: StateSpaceModel
    x: np.ndarray
    stats: np.ndarray
    logw: np.ndarray
    t: int
    theta_gen: Parameter
    loglik_closed: float = 0.0

    @property
    def N(self) -> int:
        return len(self.x)

    def loglik_estimate(self) -> float:
        """Product-of-segments likelihood estimate (log scale)."""
        return self.loglik_closed + logmeanexp(self.logw)

    def ess(self) -> float:
        return ess(self.logw)


@dataclass
class LoglikEstimate:
    value: float
    segments: list = field(default_factory=list)  # (t, segment log value)


def init_cloud(model, theta, y0, N, rng) -> ParticleCloud:
    if N < 2:
        raise ValueError("need at least 2 particles")
    x0, log_u = model.propose_initial(theta, y0, N, rng)
    if not np.any(np.isfinite(log_u)):
        raise DegenerateCloudError("initial weights all degenerate")
    return ParticleCloud(
        model=model,
        x=x0,
        stats=model.init_stats(x0, y0),
        logw=np.asarray(log_u, dtype=float),
        t=0,
        theta_gen=theta,
    )


def propagate_weight(cloud: ParticleCloud, theta, y_new, rng) -> ParticleCloud:
    """One propagation/weighting step (no resampling)."""
    model = cloud.model
    t_new = cloud.t + 1
    x_new, log_u = model.propose(theta, cloud.x, y_new, t_new, rng)
    logw = cloud.logw + log_u
    if not np.any(np.isfinite(logw)):
        raise DegenerateCloudError(f"weights degenerate at t={t_new}")
    stats = model.update_stats(cloud.stats, cloud.x, x_new, y_new)
    return ParticleCloud(
        model=model,
        x=x_new,
        stats=stats,
        logw=logw,
        t=t_new,
        theta_gen=theta,
        loglik_closed=cloud.loglik_closed,
    )


def multinomial_resample(cloud: ParticleCloud, rng) -> ParticleCloud:
    """Draw N offspring with replacement; closes a likelihood segment and
    resets all log-weights to zero."""
    wbar = normalized_weights(cloud.logw)
    # inverse-CDF lookup of iid uniforms == iid categorical draws, but much
    # faster than rng.choice for large N
    cdf = np.cumsum(wbar)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, rng.random(cloud.N), side="right")
    return replace(
        cloud,
        x=cloud.x[idx],
        stats=cloud.stats[idx],
        logw=np.zeros(cloud.N),
        loglik_closed=cloud.loglik_closed + logmeanexp(cloud.logw),
    )


def maybe_resample(cloud: ParticleCloud, r2: float, rng) -> ParticleCloud:
    if not 0.0 <= r2 <= 1.0:
        raise ValueError("r2 must be in [0, 1]")
    if r2 > 0.0 and cloud.ess() / cloud.N <= r2:
        return multinomial_resample(cloud, rng)
    return cloud


def smc_step(cloud, theta, y_new, r2, rng_prop, rng_res) -> ParticleCloud:
    """Propagate, weight, then resample if ESS/N drops to r2 or below."""
    cloud = propagate_weight(cloud, theta, y_new, rng_prop)
    return maybe_resample(cloud, r2, rng_res)


def smc_run(
    model: StateSpaceModel,
    theta: Parameter,
    y: Series,
    N: int,
    r2: float = 1.0,
    seed: int = 0,
    prefix: tuple = (),
):
    """Vanilla SMC over y_{0:T}; returns the final cloud and the unbiased
    likelihood estimate (log scale) with its resampling segments.

    RNG streams are keyed by (seed, *prefix, step), so running the online
    algorithms with zero step size reproduces this bit for bit.
    """
    model.validate(theta)
    segments = []
    cloud = init_cloud(model, theta, y.y[0], N, stream(seed, *prefix, "init"))
    cloud = _record_and_resample(cloud, r2, seed, prefix, segments)
    for t in range(1, y.T + 1):
        cloud = propagate_weight(
            cloud, theta, y.y[t], stream(seed, *prefix, "prop", t)
        )
        cloud = _record_and_resample(cloud, r2, seed, prefix, segments)
    value = cloud.loglik_estimate()
    if cloud.logw.any() or not segments or segments[-1][0] != cloud.t:
        segments.append((cloud.t, logmeanexp(cloud.logw)))
    return cloud, LoglikEstimate(value=value, segments=segments)


def _record_and_resample(cloud, r2, seed, prefix, segments):
    if r2 > 0.0 and cloud.ess() / cloud.N <= r2:
        segments.append((cloud.t, logmeanexp(cloud.logw)))
        cloud = multinomial_resample(cloud, stream(seed, *prefix, "res", cloud.t))
    return cloud


def weighted_score(model, theta, stats, logw) -> np.ndarray:
    """Self-normalized weighted mean of per-particle joint-density gradients."""
    m = np.max(logw)
    if not np.isfinite(m):
        raise DegenerateCloudError("all log-weights are -inf or nan")
    w = np.exp(logw - m)
    grads = model.grad_log_joint(theta, stats)
    return (w @ grads) / w.sum()


def fisher_score(cloud: ParticleCloud, theta: Parameter) -> np.ndarray:
    """Fisher-identity score estimate at theta from a cloud targeting
    p_theta(x_{0:t} | y_{0:t})."""
    return weighted_score(cloud.model, theta, cloud.stats, cloud.logw)


def conditional_score(
    prev_cloud: ParticleCloud | None, cloud: ParticleCloud, theta: Parameter
) -> np.ndarray:
    """Difference of Fisher-identity partial scores, estimating
    the gradient of log p(y_t | y_{0:t-1}) at theta.

    The previous-time partial score is re-evaluated at the same theta on the
    pre-propagation cloud; its sufficient statistics permit evaluation at
    any parameter.  At t=0 there is no previous term.
    """
    score_t = fisher_score(cloud, theta)
    if prev_cloud is None:
        return score_t
    return score_t - fisher_score(prev_cloud, theta)
