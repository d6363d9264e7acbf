"""Command-line front end.

Subcommands: simulate, solve, estimate, replicate, bench-time, trace-error.
Exit codes: 0 success, 1 config error, 2 runtime failure, 3 a cap turned
part of the results into null statuses.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .backend import active_backend
from .baselines import exact_solve, kw_solve, sequential_series_solve
from .basis import build_basis
from .config import ConfigError, load_config
from .estimate import bellman_error_report, estimate_theta
from .model import build_career_model
from .simulate import load_dataset, save_dataset, simulate_dataset
from .slstd import SolverConfig, StepSchedule, slstd_solve
from .values import SplineValues, TableValues


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="experiment config file")
    sub.add_argument("--seed", type=int, default=None, help="override bench.seed")
    sub.add_argument("--out", default=None, help="output path")
    sub.add_argument("--threads", type=int, default=1, help="worker threads")
    sub.add_argument(
        "--no-timing",
        action="store_true",
        help="mask wall-clock columns in CSV output (determinism checks)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dmdsolve",
        description="Solve, simulate, estimate, and benchmark finite-horizon "
        "discrete Markov decision models.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="simulate a panel dataset")
    _add_common(sim)

    slv = subs.add_parser("solve", help="solve the Bellman equation once")
    _add_common(slv)
    slv.add_argument(
        "--method",
        default="slstd",
        choices=("slstd", "sequential", "kw", "exact"),
    )
    slv.add_argument("--data", default=None, help="dataset CSV (needed by slstd)")

    est = subs.add_parser("estimate", help="maximum-likelihood estimation")
    _add_common(est)
    est.add_argument(
        "--method",
        default=None,
        choices=("slstd", "sequential", "kw", "exact"),
        help="inner solver (default: estimate.solver from the config)",
    )
    est.add_argument("--data", required=True, help="dataset CSV")

    rep = subs.add_parser("replicate", help="replication study (estimation tables)")
    _add_common(rep)

    tim = subs.add_parser("bench-time", help="timing study over (p, T) cells")
    _add_common(tim)

    tra = subs.add_parser("trace-error", help="per-age error accumulation trace")
    _add_common(tra)
    return parser


def _cfg_with_seed(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg, bench=dataclasses.replace(cfg.bench, seed=args.seed)
        )
    return cfg


def _model_and_basis(cfg):
    model = build_career_model(
        cfg.model.p, cfg.model.T, cfg.model.beta, reward_kink=cfg.model.reward_kink
    )
    basis = build_basis(
        model, cfg.basis.knots_per_dim, cfg.basis.degree, cfg.basis.ridge
    )
    return model, basis


def _cmd_simulate(args) -> int:
    cfg = _cfg_with_seed(args)
    if not args.out:
        print("simulate needs --out for the dataset CSV", file=sys.stderr)
        return 2
    model, _ = _model_and_basis(cfg)
    dataset = simulate_dataset(
        model, np.asarray(cfg.model.theta_true), cfg.sim.n_agents, seed=cfg.bench.seed
    )
    save_dataset(args.out, model, dataset)
    print(
        f"wrote {dataset.n_records} records "
        f"({dataset.n_agents} agents, horizon {dataset.horizon}) to {args.out}"
    )
    return 0


def _cmd_solve(args) -> int:
    cfg = _cfg_with_seed(args)
    model, basis = _model_and_basis(cfg)
    theta = np.asarray(cfg.model.theta_true)
    mem_cap = cfg.baselines.memory_cap_bytes or None
    time_cap = cfg.baselines.time_cap_s or None
    diag: dict = {"method": args.method, "backend": active_backend()}
    t0 = time.perf_counter()
    if args.method == "slstd":
        if not args.data:
            print("slstd solve needs --data", file=sys.stderr)
            return 2
        _, dataset = load_dataset(args.data)
        w, sdiag = slstd_solve(
            model,
            basis,
            theta,
            dataset,
            StepSchedule(cfg.slstd.c1, cfg.slstd.c2),
            SolverConfig(cfg.slstd.tolerance, cfg.slstd.max_passes),
        )
        values = SplineValues(model, basis, w)
        diag.update(
            passes=sdiag.passes,
            steps=sdiag.steps,
            final_delta_w=sdiag.final_delta_w,
            converged=sdiag.converged,
            k=basis.k,
        )
        arrays = {"w": w}
    elif args.method == "exact":
        table = exact_solve(model, theta, memory_cap_bytes=mem_cap)
        values = TableValues(table)
        arrays = {"table": table}
    elif args.method == "sequential":
        sol = sequential_series_solve(
            model,
            basis,
            theta,
            grid_per_dim=cfg.baselines.grid_per_dim,
            memory_cap_bytes=mem_cap,
            time_cap_s=time_cap,
        )
        values = TableValues(sol.table)
        arrays = {"table": sol.table, "target_trace": sol.target_trace}
    else:
        sol = kw_solve(
            model,
            theta,
            states_per_period=cfg.baselines.kw_states_per_period,
            seed=cfg.bench.seed,
            memory_cap_bytes=mem_cap,
            time_cap_s=time_cap,
        )
        values = TableValues(sol.table)
        arrays = {"table": sol.table, "age_coeffs": sol.age_coeffs}
    diag["wall_time_s"] = time.perf_counter() - t0
    diag["delta_sq_full"] = bellman_error_report(model, theta, values, scope="full")
    if args.out:
        np.savez(args.out, **arrays)
        diag["arrays"] = str(args.out)
    print(json.dumps(diag, sort_keys=True))
    return 0


def _cmd_estimate(args) -> int:
    cfg = _cfg_with_seed(args)
    model, basis = _model_and_basis(cfg)
    _, dataset = load_dataset(args.data)
    method = args.method or cfg.estimate.solver
    res = estimate_theta(
        model,
        dataset,
        solver=method,
        basis=basis,
        theta0=np.asarray(cfg.estimate.theta0),
        xtol=cfg.estimate.xtol,
        ftol=cfg.estimate.ftol,
        max_iter=cfg.estimate.max_iter,
        schedule=StepSchedule(cfg.slstd.c1, cfg.slstd.c2),
        solver_config=SolverConfig(cfg.slstd.tolerance, cfg.slstd.max_passes),
        grid_per_dim=cfg.baselines.grid_per_dim,
        kw_states_per_period=cfg.baselines.kw_states_per_period,
        kw_seed=cfg.bench.seed,
        memory_cap_bytes=cfg.baselines.memory_cap_bytes or None,
        time_cap_s=cfg.baselines.time_cap_s or None,
        delta_sq_scope="full",
    )
    out = {
        "method": method,
        "theta_hat": [float(x) for x in res.theta_hat],
        "log_likelihood": res.log_likelihood,
        "solve_time_s": res.solve_time_s,
        "iterations": res.iterations,
        "converged": res.converged,
        "diverged_evals": res.diverged_evals,
        "delta_sq": res.delta_sq,
    }
    text = json.dumps(out, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _write_records(args, records) -> int:
    out_path = args.out or "results.csv"
    with open(out_path, "w") as fh:
        bench.emit_csv(records, fh, no_timing=args.no_timing)
    print(f"wrote {len(records)} records to {out_path}")
    return 3 if any(r.status != "ok" for r in records) else 0


def _cmd_replicate(args) -> int:
    cfg = _cfg_with_seed(args)
    log_path = (args.out or "results.csv") + ".log.jsonl"
    with open(log_path, "w") as log_fh:
        records = bench.run_replication_study(
            cfg, threads=args.threads, log_fh=log_fh
        )
    return _write_records(args, records)


def _cmd_bench_time(args) -> int:
    cfg = _cfg_with_seed(args)
    log_path = (args.out or "timing.csv") + ".log.jsonl"
    with open(log_path, "w") as log_fh:
        records = bench.run_timing_study(cfg, log_fh=log_fh)
    return _write_records(args, records)


def _cmd_trace_error(args) -> int:
    cfg = _cfg_with_seed(args)
    trace = bench.run_error_accumulation_trace(cfg)
    out_path = args.out or "trace.csv"
    with open(out_path, "w") as fh:
        fh.write("age,seq_max_abs_error,seq_max_target\n")
        for i, age in enumerate(trace.ages):
            fh.write(
                f"{age},{trace.seq_abs_err[i]:.6g},{trace.seq_target_trace[i]:.6g}\n"
            )
    summary = {
        "delta_sq_sequential": trace.delta_sq_sequential,
        "delta_sq_slstd": trace.delta_sq_slstd,
        "trace": out_path,
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "solve": _cmd_solve,
    "estimate": _cmd_estimate,
    "replicate": _cmd_replicate,
    "bench-time": _cmd_bench_time,
    "trace-error": _cmd_trace_error,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
