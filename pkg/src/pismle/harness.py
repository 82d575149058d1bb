"""Experiment orchestration and verification diagnostics.

Covers RMSE/failure reporting with the out-of-bounds penalty convention,
the conditional-score consistency check against the Kalman oracle, the
time-zero asymptotic-variance check against quadrature, and manifest-driven
experiment runs with deterministic (wall-clock-masked) output checksums.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import kalman
from .models import Parameter, Series, StateSpaceModel, get_model, load_series, save_series
from .optimizers import RunConfig, StepSchedule, TrajectoryRecord, run_algorithm
from .pis import retarget
from .rng import stream
from .smc import conditional_score, init_cloud, maybe_resample, normalized_weights, propagate_weight

DEFAULT_PENALTY = 0.35**2


@dataclass
class RmseReport:
    steps: np.ndarray          # output step indices
    rmse: np.ndarray           # (n_steps, p)
    param_names: tuple
    n_replications: int
    n_penalized_final: int     # replications penalized at the final step

    def final(self) -> np.ndarray:
        return self.rmse[-1]


def _records_of(traj):
    return traj.records if hasattr(traj, "records") else traj


def _term_is_bad(theta, failed, bounds, names):
    if failed or not np.all(np.isfinite(theta)):
        return True
    if bounds:
        for name, (lo, hi) in bounds.items():
            v = theta[names.index(name)]
            if not (lo < v < hi):
                return True
    return False


def rmse(trajs, theta_ref: Parameter, bounds=None, penalty=DEFAULT_PENALTY) -> RmseReport:
    """Per-parameter RMSE over aligned output steps.

    A replication whose iterate is flagged failed, non-finite, or outside
    the supplied per-parameter bounds contributes ``penalty`` to each
    squared-error term instead of its deviation.
    """
    trajs = [_records_of(t) for t in trajs]
    if not trajs:
        raise ValueError("need at least one trajectory")
    steps = np.array([r.step for r in trajs[0]])
    for t in trajs[1:]:
        if not np.array_equal(np.array([r.step for r in t]), steps):
            raise ValueError("trajectories have misaligned output steps")
    p = theta_ref.p
    sq = np.zeros((len(steps), p))
    n_pen_final = 0
    for t in trajs:
        for j, rec in enumerate(t):
            if _term_is_bad(rec.theta, rec.failed, bounds, list(theta_ref.names)):
                sq[j] += penalty
                if j == len(steps) - 1:
                    n_pen_final += 1
            else:
                sq[j] += (rec.theta - theta_ref.values) ** 2
    return RmseReport(
        steps=steps,
        rmse=np.sqrt(sq / len(trajs)),
        param_names=theta_ref.names,
        n_replications=len(trajs),
        n_penalized_final=n_pen_final,
    )


def failure_count(trajs, bounds=None, names=None) -> int:
    """Replications whose final iterate is flagged or out of bounds."""
    count = 0
    for t in trajs:
        recs = _records_of(t)
        last = recs[-1]
        nm = list(names) if names is not None else list(range(len(last.theta)))
        if _term_is_bad(last.theta, last.failed, bounds, nm):
            count += 1
    return count


def prescribed_theta_sweep(model, theta_traj, y: Series, N: int, seed: int,
                           do_retarget: bool, r2: float = 1.0):
    """Run the online particle sweep with a fixed prescribed parameter
    trajectory (no feedback, no renewal); returns the per-step conditional
    score estimates.

    With retargeting this is the semi-online machinery conditioned on the
    trajectory; without it, the inconsistent baseline.
    """
    if len(theta_traj) < y.T + 1:
        raise ValueError("trajectory shorter than the data")
    scores = np.empty((y.T + 1, theta_traj[0].p))
    cloud = None
    for t in range(y.T + 1):
        theta_t = theta_traj[t]
        prev = cloud
        if t == 0:
            cloud = init_cloud(model, theta_t, y.y[0], N, stream(seed, "init"))
        else:
            cloud = propagate_weight(cloud, theta_t, y.y[t], stream(seed, "prop", t))
        scores[t] = conditional_score(prev, cloud, theta_t)
        if do_retarget and t < y.T:
            cloud, _ = retarget(cloud, theta_t, theta_traj[t + 1])
        cloud = maybe_resample(cloud, r2, stream(seed, "res", t))
    return scores


def consistency_check(model, theta_traj, y: Series, N_list, replications: int,
                      seed: int, do_retarget: bool = True,
                      r2: float = 1.0) -> dict:
    """Conditional-score error against the exact Kalman conditional score
    along a prescribed parameter trajectory, for several particle sizes.

    Returns per-N RMS errors and the fitted slope of log-error vs log-N
    (about -1/2 for the consistent estimator, near 0 when a bias floor
    dominates).
    """
    refs = np.array(
        [
            kalman.kalman_conditional_score(theta_traj[t], y, t, model)
            for t in range(y.T + 1)
        ]
    )
    errors = {}
    for N in N_list:
        sq = 0.0
        for rep in range(replications):
            est = prescribed_theta_sweep(
                model, theta_traj, y, N, seed + 1000 * rep + N, do_retarget,
                r2=r2,
            )
            sq += np.mean((est - refs) ** 2)
        errors[N] = float(np.sqrt(sq / replications))
    logn = np.log(np.array(list(errors), dtype=float))
    loge = np.log(np.array([errors[N] for N in errors]))
    slope = float(np.polyfit(logn, loge, 1)[0])
    return {"errors": errors, "slope": slope, "retarget": do_retarget}


def variance_t0_check(model, theta0: Parameter, f, N: int, replications: int,
                      seed: int, y0: float | None = None) -> dict:
    """Compare N * Var of the time-zero self-normalized estimator against
    the quadrature value of the asymptotic variance integral.

    Only the linear-Gaussian model is supported (the filtering density at
    time zero is then available in closed form).
    """
    if not model.linear_gaussian:
        raise ValueError("time-zero variance check requires a linear-Gaussian model")
    model.validate(theta0)
    if y0 is None:
        y0 = float(model.simulate(theta0, 0, stream(seed, "data")).y[0])
    tau2 = model._stationary_var(theta0)
    m0 = model.init_mean
    sy2 = theta0["sigma_y"] ** 2
    vp = 1.0 / (1.0 / tau2 + 1.0 / sy2)
    mp = vp * (m0 / tau2 + y0 / sy2)

    def posterior(x):
        return np.exp(-0.5 * (x - mp) ** 2 / vp) / np.sqrt(2.0 * np.pi * vp)

    if model.proposal == "bootstrap":
        def proposal(x):
            return np.exp(-0.5 * (x - m0) ** 2 / tau2) / np.sqrt(2.0 * np.pi * tau2)
    else:
        proposal = posterior

    mean_f = quad(lambda x: f(x) * posterior(x), mp - 12 * np.sqrt(vp),
                  mp + 12 * np.sqrt(vp), epsabs=1e-12)[0]
    lo = m0 - 8.0 * np.sqrt(tau2)
    hi = m0 + 8.0 * np.sqrt(tau2)
    v_quad = quad(
        lambda x: posterior(x) ** 2 / proposal(x) * (f(x) - mean_f) ** 2,
        lo, hi, epsabs=1e-10, limit=200,
    )[0]

    ests = np.empty(replications)
    for rep in range(replications):
        rng = stream(seed, "rep", rep)
        x0, log_u = model.propose_initial(theta0, y0, N, rng)
        wbar = normalized_weights(log_u)
        ests[rep] = float(wbar @ f(x0))
    emp = float(N * np.var(ests, ddof=1))
    return {
        "quadrature": float(v_quad),
        "empirical": emp,
        "ratio": emp / v_quad if v_quad > 0 else float("nan"),
        "posterior_mean": mean_f,
        "y0": y0,
    }


# ---------------------------------------------------------------------------
# Experiment runner


@dataclass
class AlgoSpec:
    name: str
    theta0: np.ndarray
    N: int
    schedule: StepSchedule
    r: float = 0.5
    r1: float = 0.5
    r2: float = 1.0
    K: int = 1
    max_iters: int = 100
    budget_seconds: float | None = None
    free_mask: np.ndarray | None = None
    label: str = ""

    def key(self) -> str:
        return self.label or self.name


@dataclass
class ExperimentConfig:
    model_id: str
    algos: list
    S: int
    outdir: str
    proposal: str = "bootstrap"
    data_csv: str | None = None
    theta_star: np.ndarray | None = None
    T: int | None = None
    data_seed: int = 1
    seed: int = 0
    reference: str = "kalman"   # "kalman" | "values" | "fisher-sga"
    reference_values: np.ndarray | None = None
    bounds: dict = field(default_factory=dict)
    penalty: float = DEFAULT_PENALTY


def _load_or_simulate(cfg: ExperimentConfig, model) -> Series:
    if cfg.data_csv:
        return load_series(cfg.data_csv)
    if cfg.theta_star is None or cfg.T is None:
        raise ValueError("need either data_csv or (theta_star, T)")
    theta = model.parameter(cfg.theta_star)
    return model.simulate(theta, cfg.T, stream(cfg.data_seed, "data"))


def _reference_theta(cfg, model, y) -> Parameter:
    if cfg.reference == "values":
        return model.parameter(cfg.reference_values)
    if cfg.reference == "kalman":
        return kalman.kalman_mle(model.parameter(cfg.algos[0].theta0), y, model)
    if cfg.reference == "fisher-sga":
        base = cfg.algos[0]
        ref_cfg = RunConfig(
            model=model, y=y,
            theta0=model.parameter(
                cfg.theta_star if cfg.theta_star is not None else base.theta0
            ),
            N=4 * base.N, schedule=base.schedule, seed=cfg.seed + 999_983,
            max_iters=4 * base.max_iters,
        )
        return run_algorithm("fisher-sga", ref_cfg).theta
    raise ValueError(f"unknown reference source {cfg.reference!r}")


def write_trajectory_csv(path, records, param_names):
    with open(path, "w") as fh:
        heads = ",".join(f"theta_{n}" for n in param_names)
        fh.write(f"iter,t_wall,{heads},event,ess_a,ess_w,failed\n")
        for r in records:
            thetas = ",".join(f"{float(v)!r}" for v in r.theta)
            fh.write(
                f"{r.step},{r.wall:.3f},{thetas},{r.event},"
                f"{float(r.ess_a)!r},{float(r.ess_w)!r},{int(r.failed)}\n"
            )


def canonical_checksum(path, mask_wall_col: int | None = 1) -> str:
    """SHA-256 of a CSV with the wall-clock column masked (wall time is the
    one legitimately non-deterministic output field)."""
    h = hashlib.sha256()
    with open(path) as fh:
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if mask_wall_col is not None and len(parts) > mask_wall_col:
                parts[mask_wall_col] = "-"
            h.update((",".join(parts) + "\n").encode())
    return h.hexdigest()


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every algorithm on identical data over S replications; write
    trajectory CSVs, RMSE CSVs, a failure/renewal summary, and a manifest
    with wall-clock-masked checksums."""
    model = get_model(cfg.model_id, cfg.proposal)
    y = _load_or_simulate(cfg, model)
    os.makedirs(cfg.outdir, exist_ok=True)
    data_path = os.path.join(cfg.outdir, "data.csv")
    save_series(data_path, y)
    theta_ref = _reference_theta(cfg, model, y)

    outputs = {}
    summary_rows = []
    for spec in cfg.algos:
        trajs = []
        renewals = 0
        for s in range(cfg.S):
            run_cfg = RunConfig(
                model=model, y=y, theta0=model.parameter(spec.theta0),
                N=spec.N, schedule=spec.schedule,
                seed=cfg.seed + 7919 * s + 31, r=spec.r, r1=spec.r1,
                r2=spec.r2, K=spec.K, max_iters=spec.max_iters,
                budget_seconds=spec.budget_seconds, free_mask=spec.free_mask,
            )
            res = run_algorithm(spec.name, run_cfg)
            renewals += res.n_renewals
            trajs.append(res)
            path = os.path.join(cfg.outdir, f"traj_{spec.key()}_rep{s}.csv")
            write_trajectory_csv(path, res.records, model.param_names)
        report = rmse(trajs, theta_ref, bounds=cfg.bounds, penalty=cfg.penalty)
        fails = failure_count(trajs, bounds=cfg.bounds, names=model.param_names)
        rpath = os.path.join(cfg.outdir, f"rmse_{spec.key()}.csv")
        with open(rpath, "w") as fh:
            heads = ",".join(f"rmse_{n}" for n in model.param_names)
            fh.write(f"iter,{heads}\n")
            for step, row in zip(report.steps, report.rmse):
                fh.write(f"{step}," + ",".join(f"{float(v)!r}" for v in row) + "\n")
        summary_rows.append((spec.key(), fails, renewals, report.final()))
        outputs[spec.key()] = {
            "rmse": report, "failures": fails, "renewals": renewals,
            "results": trajs,
        }

    spath = os.path.join(cfg.outdir, "summary.csv")
    with open(spath, "w") as fh:
        heads = ",".join(f"final_rmse_{n}" for n in model.param_names)
        fh.write(f"algorithm,failures,renewals,{heads}\n")
        for key, fails, renew, final in summary_rows:
            fh.write(f"{key},{fails},{renew}," + ",".join(f"{float(v)!r}" for v in final) + "\n")

    manifest = {
        "model": cfg.model_id,
        "proposal": cfg.proposal,
        "S": cfg.S,
        "seed": cfg.seed,
        "data_seed": cfg.data_seed,
        "data_csv": cfg.data_csv or "",
        "theta_star": _csv(cfg.theta_star),
        "T": "" if cfg.T is None else cfg.T,
        "reference": cfg.reference,
        "theta_ref": _csv(theta_ref.values),
        "penalty": cfg.penalty,
    }
    for i, spec in enumerate(cfg.algos):
        manifest[f"algo.{i}.name"] = spec.name
        manifest[f"algo.{i}.label"] = spec.key()
        manifest[f"algo.{i}.theta0"] = _csv(spec.theta0)
        manifest[f"algo.{i}.N"] = spec.N
        manifest[f"algo.{i}.schedule"] = (
            f"{spec.schedule.c1},{spec.schedule.A},{spec.schedule.alpha},"
            f"{spec.schedule.c2},{spec.schedule.beta}"
        )
        manifest[f"algo.{i}.thresholds"] = f"{spec.r},{spec.r1},{spec.r2},{spec.K}"
        manifest[f"algo.{i}.max_iters"] = spec.max_iters
    for name in sorted(os.listdir(cfg.outdir)):
        if name.endswith(".csv"):
            manifest[f"sha256.{name}"] = canonical_checksum(
                os.path.join(cfg.outdir, name),
                mask_wall_col=1 if name.startswith("traj_") else None,
            )
    mpath = os.path.join(cfg.outdir, "manifest.txt")
    with open(mpath, "w") as fh:
        for k, v in manifest.items():
            fh.write(f"{k} = {v}\n")
    outputs["manifest"] = manifest
    outputs["theta_ref"] = theta_ref
    return outputs


def _csv(values) -> str:
    if values is None:
        return ""
    return ",".join(f"{float(v)!r}" for v in np.asarray(values).ravel())
