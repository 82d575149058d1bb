"""Particle importance sampling: joint-density ratio weights, the
reweighted score estimator, retargeting, and the smoothed likelihood curve.

The ratio weight a(theta0 -> theta) for a particle is evaluated from its
sufficient statistics as log p_theta - log p_theta0 of the same path.  The
ESS of the pure a-weights is the adaptation signal used by the optimizers:
it equals N at theta = theta0 and decays as theta moves away.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .models import Parameter, StateSpaceModel
from .smc import ParticleCloud, ess, weighted_score


class FarExtrapolationError(RuntimeError):
    """The a-weights underflowed: theta is too far from theta0."""


def log_is_weight(
    stats: np.ndarray, theta0: Parameter, theta: Parameter, model: StateSpaceModel
) -> np.ndarray:
    """Log joint-density ratio log p_theta / log p_theta0 on shared stats."""
    return model.log_joint(theta, stats) - model.log_joint(theta0, stats)


def a_ess(log_a: np.ndarray) -> float:
    """ESS of the pure ratio weights (scale-invariant, max-subtracted)."""
    return ess(log_a)


def pis_score(cloud: ParticleCloud, theta0: Parameter, theta: Parameter):
    """Reweighted Fisher-identity score estimate at theta from a cloud
    targeting p_theta0, plus the ESS of the ratio weights.

    At theta == theta0 the ratio weights are exactly zero in the log domain
    and the estimate coincides bitwise with the plain Fisher score.
    """
    model = cloud.model
    log_a = log_is_weight(cloud.stats, theta0, theta, model)
    if not np.any(np.isfinite(log_a + cloud.logw)):
        raise FarExtrapolationError(
            f"importance weights underflowed between {theta0} and {theta}"
        )
    score = weighted_score(model, theta, cloud.stats, cloud.logw + log_a)
    return score, a_ess(log_a)


def smoothed_loglik_curve(
    cloud: ParticleCloud, theta0: Parameter, grid: list
) -> np.ndarray:
    """Continuous-in-theta log-likelihood curve from one particle set.

    For each grid value: log of the self-normalized mean ratio weight plus
    the cloud's own likelihood estimate at theta0, so curves produced from
    different theta0 runs live on a common axis.
    """
    model = cloud.model
    base = cloud.loglik_estimate()
    wbar_log = cloud.logw - np.max(cloud.logw)
    w = np.exp(wbar_log)
    w = w / w.sum()
    out = np.empty(len(grid))
    for j, theta in enumerate(grid):
        log_a = log_is_weight(cloud.stats, theta0, theta, model)
        m = np.max(log_a)
        if not np.isfinite(m):
            raise FarExtrapolationError(f"ratio weights underflowed at {theta}")
        out[j] = base + m + np.log(np.sum(w * np.exp(log_a - m)))
    return out


@dataclass
class RetargetDiagnostic:
    """Bookkeeping for one retarget move (feeds the renewing window)."""

    pre_ess: float
    post_ess: float
    a_ess: float
    theta_from: Parameter
    theta_to: Parameter
    t: int


def retarget(
    cloud: ParticleCloud, theta_from: Parameter, theta_to: Parameter
):
    """Multiply cloud weights by the ratio a(theta_from -> theta_to) so the
    cloud targets the filtering density at theta_to."""
    log_a = log_is_weight(cloud.stats, theta_from, theta_to, cloud.model)
    new_logw = cloud.logw + log_a
    diag = RetargetDiagnostic(
        pre_ess=cloud.ess(),
        post_ess=ess(new_logw),
        a_ess=a_ess(log_a),
        theta_from=theta_from,
        theta_to=theta_to,
        t=cloud.t,
    )
    return replace(cloud, logw=new_logw, theta_gen=theta_to), diag
