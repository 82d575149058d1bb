"""Estimation procedures: step schedules, SPSA, the SGA baselines, the
adaptive offline optimizer, the online baseline, the semi-online optimizer,
and the ESS-threshold tuning helpers.

All optimizers share the failure convention: a proposed parameter outside
the model's validity domain (or a degenerate particle cloud) sets a sticky
failure flag and freezes the parameter; the run keeps emitting trajectory
records so replications stay aligned, and the reporting harness applies
the penalty.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .models import InvalidParameterError, Parameter, Series, StateSpaceModel
from .pis import FarExtrapolationError, log_is_weight, pis_score, retarget, smoothed_loglik_curve
from .rng import stream
from .smc import (
    DegenerateCloudError,
    ParticleCloud,
    conditional_score,
    fisher_score,
    init_cloud,
    maybe_resample,
    propagate_weight,
    smc_run,
)

INNER_TOL = 1e-5
OUTER_TOL = 1e-4
INNER_CAP = 200


@dataclass(frozen=True)
class StepSchedule:
    """Decaying step sizes gamma_t = c1 / (A + t)^alpha with an SPSA
    perturbation sidecar tau_t = c2 / (A + t)^beta."""

    c1: float
    A: float = 100.0
    alpha: float = 1.0
    c2: float = 0.05
    beta: float = 1.0 / 6.0

    def __post_init__(self):
        if self.c1 < 0 or self.c2 <= 0 or self.A < 0:
            raise ValueError("require c1 >= 0, c2 > 0, A >= 0")

    def gamma(self, t: int) -> float:
        return self.c1 / (self.A + t) ** self.alpha

    def tau(self, t: int) -> float:
        return self.c2 / (self.A + t) ** self.beta


def step_size(sched: StepSchedule, t: int) -> float:
    if t < 0:
        raise ValueError("t must be >= 0")
    return sched.gamma(t)


@dataclass
class RunConfig:
    """Everything one optimizer run needs besides the algorithm itself."""

    model: StateSpaceModel
    y: Series
    theta0: Parameter
    N: int
    schedule: StepSchedule
    seed: int = 0
    r: float = 0.5          # adaptGA a-ESS threshold
    r1: float = 0.5         # semiGA renewing threshold
    r2: float = 1.0         # resampling threshold
    K: int = 1              # renewing window length
    max_iters: int = 100    # offline outer iterations / online ignored
    budget_seconds: float | None = None
    step_scale: float | None = None  # online multiplier; defaults to T
    free_mask: np.ndarray | None = None  # bool per coordinate; None = all free
    mcml: bool = False      # adaptGA: drop the ESS stopping rule
    output_every: int | None = None  # online record cadence; default ceil(T/200)

    def mask(self) -> np.ndarray:
        if self.free_mask is None:
            return np.ones(self.theta0.p, dtype=bool)
        return np.asarray(self.free_mask, dtype=bool)

    def online_scale(self) -> float:
        return float(self.step_scale) if self.step_scale is not None else float(len(self.y.y))

    def cadence(self) -> int:
        if self.output_every is not None:
            return max(1, int(self.output_every))
        return max(1, (self.y.T + 1) // 200)


@dataclass
class TrajectoryRecord:
    step: int
    theta: np.ndarray
    wall: float
    event: str = ""
    ess_a: float = float("nan")
    ess_w: float = float("nan")
    failed: bool = False


@dataclass
class OptimizerResult:
    records: list
    theta: Parameter
    failed: bool = False
    n_renewals: int = 0
    cloud: ParticleCloud | None = None
    loglik: float | None = None

    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])


def spsa_gradient(loglik, theta: Parameter, tau: float, rng, mask=None):
    """Two-evaluation simultaneous-perturbation gradient estimate.

    Returns (ghat, ok); ok is False when either perturbed evaluation is
    non-finite or leaves the parameter domain.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    p = theta.p
    mask = np.ones(p, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    delta = rng.choice([-1.0, 1.0], size=p)
    delta[~mask] = 0.0
    lp = loglik(theta.replace(theta.values + tau * delta))
    lm = loglik(theta.replace(theta.values - tau * delta))
    if lp is None or lm is None or not np.isfinite(lp) or not np.isfinite(lm):
        return np.zeros(p), False
    g = np.zeros(p)
    g[mask] = (lp - lm) / (2.0 * tau * delta[mask])
    return g, True


class _Run:
    """Shared bookkeeping: wall clock, sticky failure, record emission."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.t0 = time.perf_counter()
        self.records: list = []
        self.failed = False
        self.theta = cfg.theta0
        self.mask = cfg.mask()

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def over_budget(self) -> bool:
        b = self.cfg.budget_seconds
        return b is not None and self.elapsed() >= b

    def emit(self, step, event="", ess_a=float("nan"), ess_w=float("nan")):
        self.records.append(
            TrajectoryRecord(
                step=step,
                theta=self.theta.values.copy(),
                wall=self.elapsed(),
                event=event,
                ess_a=ess_a,
                ess_w=ess_w,
                failed=self.failed,
            )
        )

    def try_update(self, new_values) -> bool:
        """Apply a parameter update unless failed or the target is invalid."""
        if self.failed:
            return False
        cand = self.theta.replace(np.where(self.mask, new_values, self.theta.values))
        if not np.all(np.isfinite(cand.values)) or not self.cfg.model.is_valid(cand):
            self.failed = True
            return False
        self.theta = cand
        return True

    def result(self, **extra) -> OptimizerResult:
        return OptimizerResult(
            records=self.records, theta=self.theta, failed=self.failed, **extra
        )


def naive_sga(cfg: RunConfig) -> OptimizerResult:
    """SGA with SPSA finite differences of the SMC likelihood estimate
    (two fresh particle runs per iteration, independent seeds)."""
    run = _Run(cfg)
    run.emit(0, event="init")
    for n in range(cfg.max_iters):
        if run.over_budget():
            break
        if not run.failed:
            def smc_loglik(th, _n=n, _side=[0]):
                _side[0] += 1
                if not cfg.model.is_valid(th):
                    return None
                try:
                    _, est = smc_run(
                        cfg.model, th, cfg.y, cfg.N, cfg.r2, cfg.seed,
                        prefix=("iter", _n, "eval", _side[0]),
                    )
                except DegenerateCloudError:
                    return None
                return est.value

            g, ok = spsa_gradient(
                smc_loglik,
                run.theta,
                cfg.schedule.tau(n),
                stream(cfg.seed, "spsa", n),
                mask=run.mask,
            )
            if not ok:
                run.failed = True
            else:
                run.try_update(run.theta.values + cfg.schedule.gamma(n) * g)
        run.emit(n + 1, event="update")
    return run.result()


def fisher_sga(cfg: RunConfig) -> OptimizerResult:
    """SGA driven by the Fisher-identity score from a fresh SMC run."""
    run = _Run(cfg)
    run.emit(0, event="init")
    cloud = None
    for n in range(cfg.max_iters):
        if run.over_budget():
            break
        if not run.failed:
            try:
                cloud, _ = smc_run(
                    cfg.model, run.theta, cfg.y, cfg.N, cfg.r2, cfg.seed,
                    prefix=("iter", n),
                )
                g = fisher_score(cloud, run.theta)
                run.try_update(run.theta.values + cfg.schedule.gamma(n) * g)
            except DegenerateCloudError:
                run.failed = True
        run.emit(n + 1, event="update", ess_w=cloud.ess() if cloud else float("nan"))
    return run.result(cloud=cloud)


def adapt_ga_pis(cfg: RunConfig) -> OptimizerResult:
    """Adaptive gradient ascent recycling each particle set for multiple
    reweighted score steps, stopped by the a-weight ESS threshold."""
    if not (0.0 < cfg.r < 1.0) and not cfg.mcml:
        raise ValueError("adaptGA requires r in (0, 1)")
    run = _Run(cfg)
    run.emit(0, event="init")
    cloud = None
    for n in range(cfg.max_iters):
        if run.over_budget() or run.failed:
            if run.failed:
                run.emit(n + 1, event="failed")
            break
        theta_n = run.theta
        try:
            cloud, _ = smc_run(
                cfg.model, theta_n, cfg.y, cfg.N, cfg.r2, cfg.seed,
                prefix=("outer", n),
            )
        except DegenerateCloudError:
            run.failed = True
            run.emit(n + 1, event="failed")
            break
        gamma = cfg.schedule.gamma(n)
        aess = float(cloud.N)
        for _k in range(INNER_CAP):
            try:
                g, aess = pis_score(cloud, theta_n, run.theta)
            except FarExtrapolationError:
                break  # force regeneration
            if not cfg.mcml and aess <= cfg.r * cloud.N:
                break
            prev = run.theta.values.copy()
            if not run.try_update(run.theta.values + gamma * g):
                break
            if np.max(np.abs(run.theta.values - prev)) <= INNER_TOL:
                break
            if run.over_budget():
                break
        run.emit(n + 1, event="regen", ess_a=aess)
        if (
            not run.failed
            and np.max(np.abs(run.theta.values - theta_n.values)) <= OUTER_TOL
        ):
            run.emit(n + 1, event="converged", ess_a=aess)
            break
    return run.result(cloud=cloud)


def _online_loop(cfg: RunConfig, do_retarget: bool):
    """Shared single-sweep loop for the online baseline and semiGA-PIS.

    RNG stream keys match ``smc_run`` so a zero step size reproduces the
    vanilla SMC run bit for bit.
    """
    run = _Run(cfg)
    scale = cfg.online_scale()
    cadence = cfg.cadence()
    window = deque([float(cfg.N)] * cfg.K, maxlen=cfg.K)
    n_renewals = 0
    cloud = None
    prev_cloud = None
    pending = ""  # most notable event since the last emitted record
    run.emit(0, event="init")
    for t in range(cfg.y.T + 1):
        if run.over_budget():
            break
        if not run.failed:
            try:
                prev_cloud = cloud
                if t == 0:
                    cloud = init_cloud(
                        cfg.model, run.theta, cfg.y.y[0], cfg.N,
                        stream(cfg.seed, "init"),
                    )
                else:
                    cloud = propagate_weight(
                        cloud, run.theta, cfg.y.y[t], stream(cfg.seed, "prop", t)
                    )
                # conditional GA
                theta_t = run.theta
                g = conditional_score(prev_cloud, cloud, theta_t)
                gamma = cfg.schedule.gamma(t) * scale
                run.try_update(theta_t.values + gamma * g)
                event = ""
                aess = float("nan")
                if do_retarget and not run.failed:
                    cloud, diag = retarget(cloud, theta_t, run.theta)
                    aess = diag.a_ess
                    window.append(aess)
                    if np.mean(window) <= cfg.r1 * cfg.N:
                        cloud, _ = smc_run(
                            cfg.model, run.theta, Series(cfg.y.y[: t + 1]),
                            cfg.N, cfg.r2, cfg.seed, prefix=("renew", t),
                        )
                        window.extend([float(cfg.N)] * cfg.K)
                        n_renewals += 1
                        event = "renewal"
                if not run.failed and event != "renewal":
                    before = cloud
                    cloud = maybe_resample(cloud, cfg.r2, stream(cfg.seed, "res", t))
                    if cloud is not before:
                        event = event or "resample"
            except (DegenerateCloudError, InvalidParameterError):
                run.failed = True
                event = "failed"
                aess = float("nan")
        else:
            event, aess = "frozen", float("nan")
        if event in ("failed", "renewal") or (event and not pending):
            pending = event if pending != "failed" else pending
        # fixed cadence keeps records step-aligned across replications
        if t % cadence == 0 or t == cfg.y.T:
            run.emit(
                t,
                event=pending or event,
                ess_a=aess,
                ess_w=cloud.ess() if (cloud is not None and not run.failed) else float("nan"),
            )
            pending = ""
    return run.result(cloud=cloud, n_renewals=n_renewals,
                      loglik=None if cloud is None or run.failed else cloud.loglik_estimate())


def vanilla_online_ga(cfg: RunConfig) -> OptimizerResult:
    """Single-sweep online gradient ascent without retargeting or renewal
    (the inconsistent baseline)."""
    return _online_loop(cfg, do_retarget=False)


def semi_ga_pis(cfg: RunConfig) -> OptimizerResult:
    """Semi-online gradient ascent: conditional GA, retargeting via the
    joint-density ratio, and particle renewal when the averaged a-ESS
    falls below r1 * N."""
    if not (0.0 < cfg.r1 <= 1.0):
        raise ValueError("r1 must be in (0, 1]")
    if cfg.K < 1:
        raise ValueError("K must be >= 1")
    return _online_loop(cfg, do_retarget=True)


def tune_r_offline(model, theta_sampler, y: Series, N: int, seed: int,
                   n_samples: int = 10, fd_step: float = 1e-3) -> float:
    """Recommend the adaptGA threshold r.

    Samples parameters from the supplied region sampler, moves each by one
    Newton-style step (score over a finite-difference Hessian diagonal of
    the smoothed likelihood), and returns the mean a-ESS/N over the moves.
    """
    rng = stream(seed, "tune-r")
    vals = []
    for s in range(n_samples):
        theta = theta_sampler(rng)
        model.validate(theta)
        cloud, _ = smc_run(model, theta, y, N, 1.0, seed, prefix=("tune", s))
        g, _ = pis_score(cloud, theta, theta)
        step = np.zeros(theta.p)
        ok = True
        for i in range(theta.p):
            vp, vm = theta.values.copy(), theta.values.copy()
            vp[i] += fd_step
            vm[i] -= fd_step
            thp, thm = theta.replace(vp), theta.replace(vm)
            if not (model.is_valid(thp) and model.is_valid(thm)):
                ok = False
                break
            lp = smoothed_loglik_curve(cloud, theta, [thp])[0]
            l0 = cloud.loglik_estimate()
            lm = smoothed_loglik_curve(cloud, theta, [thm])[0]
            h_ii = (lp - 2.0 * l0 + lm) / fd_step**2
            if not np.isfinite(h_ii) or abs(h_ii) < 1e-8:
                ok = False
                break
            step[i] = g[i] / abs(h_ii)
        if not ok:
            continue
        moved = theta.replace(theta.values + step)
        if not model.is_valid(moved):
            continue
        from .pis import a_ess

        vals.append(a_ess(log_is_weight(cloud.stats, theta, moved, model)) / N)
    if not vals:
        raise RuntimeError("no usable tuning samples; widen the region")
    return float(np.mean(vals))


def tune_r1_online(model, theta0: Parameter, d_grid, y: Series, N: int,
                   renew_every: int, seed: int) -> float:
    """Recommend the semiGA renewing threshold r1.

    Test sweeps move the parameter by a fixed displacement d per step
    (random sign pattern) with renewals at a fixed low cadence; d values
    whose a-ESS/N records are all large or all small are excluded and the
    median of the retained records is returned.
    """
    from .pis import a_ess

    retained = []
    for di, d in enumerate(d_grid):
        rng = stream(seed, "tune-r1", di)
        records = []
        theta = theta0
        cloud = init_cloud(model, theta, y.y[0], N, stream(seed, "tr1-init", di))
        for t in range(1, y.T + 1):
            cloud = propagate_weight(
                cloud, theta, y.y[t], stream(seed, "tr1-prop", di, t)
            )
            delta = rng.choice([-1.0, 1.0], size=theta.p)
            cand = theta.replace(theta.values + d * delta / np.sqrt(theta.p))
            if not model.is_valid(cand):
                cand = theta.replace(theta.values - d * delta / np.sqrt(theta.p))
            if not model.is_valid(cand):
                cand = theta
            records.append(a_ess(log_is_weight(cloud.stats, theta, cand, model)) / N)
            cloud, _ = retarget(cloud, theta, cand)
            theta = cand
            if t % renew_every == 0:
                cloud, _ = smc_run(
                    model, theta, Series(y.y[: t + 1]), N, 1.0, seed,
                    prefix=("tr1-renew", di, t),
                )
            else:
                cloud = maybe_resample(cloud, 1.0, stream(seed, "tr1-res", di, t))
        arr = np.array(records)
        if np.min(arr) > 0.95 or np.max(arr) < 0.05:
            continue  # move uniformly too small or too far
        retained.extend(records)
    if not retained:
        raise RuntimeError("all displacement values excluded; widen the grid")
    return float(np.median(retained))


ALGORITHMS = {
    "naive-sga": naive_sga,
    "fisher-sga": fisher_sga,
    "adaptga": adapt_ga_pis,
    "vanilla-online": vanilla_online_ga,
    "semiga": semi_ga_pis,
}


def run_algorithm(name: str, cfg: RunConfig) -> OptimizerResult:
    if name == "mcml":
        cfg.mcml = True
        return adapt_ga_pis(cfg)
    try:
        fn = ALGORITHMS[name]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS) + ['mcml']}"
        ) from None
    return fn(cfg)
