"""Command-line surface.

One console script per operation: ``kalman-mle``, ``kalman-loglik``,
``smc-loglik``, ``loglik-curve``, ``estimate``, ``tune-ess``, ``compare``,
``verify``, and ``rmse``.  All outputs are CSV or flat key-value text.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness, kalman, optimizers
from .models import Parameter, Series, get_model, load_series
from .optimizers import RunConfig, StepSchedule, run_algorithm
from .pis import a_ess, log_is_weight, smoothed_loglik_curve
from .rng import stream
from .smc import smc_run


def _floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def _add_model_data(p, data_required=True):
    p.add_argument("--model", required=True, help="ar1 | ar1-trend | sv | sv-trend | par1")
    p.add_argument("--proposal", default="bootstrap", choices=["bootstrap", "optimal"])
    p.add_argument("--data", required=data_required, help="CSV with header t,y[,x]")


def _parse_grid(text: str, theta0: Parameter):
    """``name:lo:hi:num`` -> (grid of Parameters, varied coordinate values)."""
    name, lo, hi, num = text.split(":")
    i = theta0.names.index(name)
    vals = np.linspace(float(lo), float(hi), int(num))
    grid = []
    for v in vals:
        vec = theta0.values.copy()
        vec[i] = v
        grid.append(theta0.replace(vec))
    return grid, vals


def main_kalman_mle(argv=None):
    p = argparse.ArgumentParser(prog="kalman-mle", description=kalman.kalman_mle.__doc__)
    _add_model_data(p)
    p.add_argument("--theta0", required=True, help="comma-separated start values")
    a = p.parse_args(argv)
    model = get_model(a.model, a.proposal)
    y = load_series(a.data)
    theta = kalman.kalman_mle(model.parameter(_floats(a.theta0)), y, model)
    for n, v in zip(theta.names, theta.values):
        print(f"{n} = {float(v)!r}")
    print(f"loglik = {kalman.kalman_loglik(theta, y, model)!r}")
    return 0


def main_kalman_loglik(argv=None):
    p = argparse.ArgumentParser(prog="kalman-loglik")
    _add_model_data(p)
    p.add_argument("--theta", required=True)
    a = p.parse_args(argv)
    model = get_model(a.model, a.proposal)
    y = load_series(a.data)
    print(f"loglik = {kalman.kalman_loglik(model.parameter(_floats(a.theta)), y, model)!r}")
    return 0


def main_smc_loglik(argv=None):
    p = argparse.ArgumentParser(prog="smc-loglik")
    _add_model_data(p)
    p.add_argument("--theta", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r2", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)
    model = get_model(a.model, a.proposal)
    y = load_series(a.data)
    cloud, est = smc_run(model, model.parameter(_floats(a.theta)), y, a.n, a.r2, a.seed)
    print(f"loglik = {est.value!r}")
    print(f"final_ess = {cloud.ess()!r}")
    print("t,segment_log")
    for t, seg in est.segments:
        print(f"{t},{float(seg)!r}")
    return 0


def main_loglik_curve(argv=None):
    p = argparse.ArgumentParser(prog="loglik-curve")
    _add_model_data(p)
    p.add_argument("--theta0", required=True)
    p.add_argument("--grid", required=True, help="name:lo:hi:num")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r2", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args(argv)
    model = get_model(a.model, a.proposal)
    y = load_series(a.data)
    theta0 = model.parameter(_floats(a.theta0))
    grid, vals = _parse_grid(a.grid, theta0)
    cloud, _ = smc_run(model, theta0, y, a.n, a.r2, a.seed)
    curve = smoothed_loglik_curve(cloud, theta0, grid)
    print("theta,loglik_hat,a_ess")
    for v, ll, th in zip(vals, curve, grid):
        e = a_ess(log_is_weight(cloud.stats, theta0, th, model))
        print(f"{float(v)!r},{float(ll)!r},{float(e)!r}")
    return 0


def main_estimate(argv=None):
    p = argparse.ArgumentParser(prog="estimate")
    _add_model_data(p)
    p.add_argument("--algo", required=True,
                   choices=sorted(optimizers.ALGORITHMS) + ["mcml"])
    p.add_argument("--theta0", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--r1", type=float, default=0.5)
    p.add_argument("--r2", type=float, default=1.0)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--c1", type=float, default=1e-4)
    p.add_argument("--c2", type=float, default=0.05)
    p.add_argument("--a", type=float, default=100.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0 / 6.0)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--step-scale", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="trajectory CSV path (default stdout)")
    a = p.parse_args(argv)
    model = get_model(a.model, a.proposal)
    y = load_series(a.data)
    cfg = RunConfig(
        model=model, y=y, theta0=model.parameter(_floats(a.theta0)), N=a.n,
        schedule=StepSchedule(c1=a.c1, A=a.a, alpha=a.alpha, c2=a.c2, beta=a.beta),
        seed=a.seed, r=a.r, r1=a.r1, r2=a.r2, K=a.k, max_iters=a.max_iters,
        budget_seconds=a.budget_seconds, step_scale=a.step_scale,
    )
    res = run_algorithm(a.algo, cfg)
    if a.out:
        harness.write_trajectory_csv(a.out, res.records, model.param_names)
    else:
        heads = ",".join(f"theta_{n}" for n in model.param_names)
        print(f"iter,t_wall,{heads},event,ess_a,ess_w,failed")
        for r in res.records:
            thetas = ",".join(f"{float(v)!r}" for v in r.theta)
            print(f"{r.step},{r.wall:.3f},{thetas},{r.event},"
                  f"{float(r.ess_a)!r},{float(r.ess_w)!r},{int(r.failed)}")
    return 1 if res.failed else 0


def main_tune_ess(argv=None):
    p = argparse.ArgumentParser(prog="tune-ess")
    _add_model_data(p)
    p.add_argument("--mode", required=True, choices=["offline", "online"])
    p.add_argument("--theta0", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=float, default=0.05,
                   help="offline: half-width of the sampling box around theta0")
    p.add_argument("--samples", type=int, default=10, help="offline sample count")
    p.add_argument("--d-grid", default="0.0005,0.001,0.002,0.005",
                   help="online displacement grid")
    p.add_argument("--renew-every", type=int, default=50)
    a = p.parse_args(argv)
    model = get_model(a.model, a.proposal)
    y = load_series(a.data)
    theta0 = model.parameter(_floats(a.theta0))
    if a.mode == "offline":
        def sampler(rng):
            return theta0.replace(
                theta0.values + rng.uniform(-a.radius, a.radius, theta0.p)
            )

        r = optimizers.tune_r_offline(model, sampler, y, a.n, a.seed, a.samples)
        print(f"r = {r!r}")
    else:
        r1 = optimizers.tune_r1_online(
            model, theta0, _floats(a.d_grid), y, a.n, a.renew_every, a.seed
        )
        print(f"r1 = {r1!r}")
    return 0


def _parse_config(path) -> harness.ExperimentConfig:
    """Flat ``key = value`` experiment configuration.

    Keys: model, proposal, S, seed, data_seed, data (csv path or "simulate"),
    theta_star, T, reference (kalman|values|fisher-sga), reference_values,
    penalty, outdir, bound.<param> = lo,hi, and per-algorithm blocks
    algo.<i>.{name,label,theta0,n,c1,c2,a,alpha,beta,r,r1,r2,k,max_iters,
    budget_seconds}.
    """
    kv = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()

    def pop(key, default=None):
        return kv.pop(key, default)

    bounds = {}
    for k in list(kv):
        if k.startswith("bound."):
            lo, hi = _floats(kv.pop(k))
            bounds[k[len("bound."):]] = (lo, hi)

    algos = []
    i = 0
    while f"algo.{i}.name" in kv:
        def apop(field, default=None):
            return kv.pop(f"algo.{i}.{field}", default)

        sched = StepSchedule(
            c1=float(apop("c1", 1e-4)), A=float(apop("a", 100.0)),
            alpha=float(apop("alpha", 1.0)), c2=float(apop("c2", 0.05)),
            beta=float(apop("beta", 1.0 / 6.0)),
        )
        budget = apop("budget_seconds")
        algos.append(harness.AlgoSpec(
            name=apop("name"), label=apop("label", ""),
            theta0=_floats(apop("theta0")), N=int(apop("n")), schedule=sched,
            r=float(apop("r", 0.5)), r1=float(apop("r1", 0.5)),
            r2=float(apop("r2", 1.0)), K=int(apop("k", 1)),
            max_iters=int(apop("max_iters", 100)),
            budget_seconds=float(budget) if budget is not None else None,
        ))
        i += 1

    data = pop("data", "simulate")
    theta_star = pop("theta_star")
    ref_values = pop("reference_values")
    T = pop("T")
    cfg = harness.ExperimentConfig(
        model_id=pop("model"),
        proposal=pop("proposal", "bootstrap"),
        algos=algos,
        S=int(pop("S", 1)),
        outdir=pop("outdir", "out"),
        data_csv=None if data == "simulate" else data,
        theta_star=_floats(theta_star) if theta_star else None,
        T=int(T) if T else None,
        data_seed=int(pop("data_seed", 1)),
        seed=int(pop("seed", 0)),
        reference=pop("reference", "kalman"),
        reference_values=_floats(ref_values) if ref_values else None,
        bounds=bounds,
        penalty=float(pop("penalty", harness.DEFAULT_PENALTY)),
    )
    if kv:
        raise ValueError(f"unrecognized config keys: {sorted(kv)}")
    return cfg


def main_compare(argv=None):
    p = argparse.ArgumentParser(prog="compare", description=_parse_config.__doc__)
    p.add_argument("--config", required=True)
    a = p.parse_args(argv)
    out = harness.run_experiment(_parse_config(a.config))
    for key, val in out["manifest"].items():
        print(f"{key} = {val}")
    return 0


def main_verify(argv=None):
    p = argparse.ArgumentParser(prog="verify")
    sub = p.add_subparsers(dest="check", required=True)

    pc = sub.add_parser("consistency")
    _add_model_data(pc)
    pc.add_argument("--theta-start", required=True)
    pc.add_argument("--theta-end", required=True,
                    help="trajectory interpolates linearly start -> end over t")
    pc.add_argument("--n-list", default="250,1000,4000")
    pc.add_argument("--reps", type=int, default=10)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--no-retarget", action="store_true",
                    help="run the baseline without retargeting")

    pv = sub.add_parser("variance-t0")
    _add_model_data(pv, data_required=False)
    pv.add_argument("--theta", required=True)
    pv.add_argument("--n", type=int, default=1000)
    pv.add_argument("--reps", type=int, default=2000)
    pv.add_argument("--seed", type=int, default=0)

    a = p.parse_args(argv)
    model = get_model(a.model, a.proposal)
    if a.check == "consistency":
        y = load_series(a.data)
        start, end = _floats(a.theta_start), _floats(a.theta_end)
        frac = np.linspace(0.0, 1.0, y.T + 1)
        traj = [model.parameter(start + f * (end - start)) for f in frac]
        rep = harness.consistency_check(
            model, traj, y, [int(n) for n in a.n_list.split(",")],
            a.reps, a.seed, do_retarget=not a.no_retarget,
        )
        print("N,rms_error")
        for N, e in rep["errors"].items():
            print(f"{N},{float(e)!r}")
        print(f"slope = {rep['slope']!r}")
    else:
        y0 = None
        if a.data:
            y0 = float(load_series(a.data).y[0])
        rep = harness.variance_t0_check(
            model, model.parameter(_floats(a.theta)), lambda x: x,
            a.n, a.reps, a.seed, y0=y0,
        )
        for k in ("quadrature", "empirical", "ratio"):
            print(f"{k} = {rep[k]!r}")
    return 0


def _read_trajectory_csv(path):
    recs = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        ntheta = sum(1 for h in header if h.startswith("theta_"))
        for line in fh:
            parts = line.strip().split(",")
            recs.append(optimizers.TrajectoryRecord(
                step=int(parts[0]),
                theta=np.array([float(v) for v in parts[2:2 + ntheta]]),
                wall=float(parts[1]),
                event=parts[2 + ntheta],
                ess_a=float(parts[3 + ntheta]),
                ess_w=float(parts[4 + ntheta]),
                failed=bool(int(parts[5 + ntheta])),
            ))
    names = tuple(h[len("theta_"):] for h in header if h.startswith("theta_"))
    return recs, names


def main_rmse(argv=None):
    p = argparse.ArgumentParser(prog="rmse")
    p.add_argument("--traj-dir", required=True, help="directory of trajectory CSVs")
    p.add_argument("--theta-ref", required=True)
    p.add_argument("--bound", action="append", default=[],
                   help="param:lo:hi, repeatable")
    p.add_argument("--penalty", type=float, default=harness.DEFAULT_PENALTY)
    a = p.parse_args(argv)
    import glob as _glob
    import os as _os

    paths = sorted(_glob.glob(_os.path.join(a.traj_dir, "*.csv")))
    if not paths:
        print(f"no trajectory CSVs in {a.traj_dir}", file=sys.stderr)
        return 2
    trajs, names = [], None
    for path in paths:
        recs, nm = _read_trajectory_csv(path)
        trajs.append(recs)
        names = nm
    bounds = {}
    for b in a.bound:
        name, lo, hi = b.split(":")
        bounds[name] = (float(lo), float(hi))
    ref = Parameter(_floats(a.theta_ref), names)
    rep = harness.rmse(trajs, ref, bounds=bounds, penalty=a.penalty)
    heads = ",".join(f"rmse_{n}" for n in names)
    print(f"iter,{heads}")
    for step, row in zip(rep.steps, rep.rmse):
        print(f"{step}," + ",".join(f"{float(v)!r}" for v in row))
    print(f"penalized_final = {rep.n_penalized_final}")
    return 0
