"""Experiment harness: replication studies, timing studies, and the
error-accumulation trace, with CSV output.

All randomness is derived from the configured master seed (replication r
simulates with seed + r), so a run is reproducible byte for byte apart from
the wall-clock columns, which the CSV writer can mask.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Optional

import numpy as np

from .baselines import (
    MemoryCapExceeded,
    TimeCapExceeded,
    exact_solve,
    kw_solve,
    sequential_series_solve,
)
from .basis import build_basis
from .config import ExperimentConfig
from .estimate import bellman_error_report, estimate_theta
from .model import build_career_model
from .simulate import simulate_dataset
from .slstd import SolverConfig, StepSchedule, slstd_solve
from .values import SplineValues, TableValues

CSV_COLUMNS = (
    "method",
    "p",
    "T",
    "n_states",
    "replications",
    "theta1_mean",
    "theta1_sd",
    "theta2_mean",
    "theta2_sd",
    "theta3_mean",
    "theta3_sd",
    "theta4_mean",
    "theta4_sd",
    "time_mean_s",
    "time_sd_s",
    "delta_sq_mean",
    "delta_sq_sd",
    "status",
)

_TIMING_COLUMNS = ("time_mean_s", "time_sd_s")


@dataclass
class BenchRecord:
    method: str
    p: int
    T: int
    n_states: int
    replications: int = 0
    theta_mean: Optional[tuple] = None
    theta_sd: Optional[tuple] = None
    time_mean: Optional[float] = None
    time_sd: Optional[float] = None
    delta_mean: Optional[float] = None
    delta_sd: Optional[float] = None
    status: str = "ok"


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6g}"


def _fmt_sci(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.1E}"


def record_row(rec: BenchRecord, no_timing: bool = False) -> dict[str, str]:
    row = {c: "" for c in CSV_COLUMNS}
    row["method"] = rec.method
    row["p"] = str(rec.p)
    row["T"] = str(rec.T)
    row["n_states"] = str(rec.n_states)
    row["replications"] = str(rec.replications)
    row["status"] = rec.status
    if rec.status == "ok":
        if rec.theta_mean is not None:
            for i in range(4):
                row[f"theta{i + 1}_mean"] = _fmt(rec.theta_mean[i])
                if rec.theta_sd is not None:
                    row[f"theta{i + 1}_sd"] = _fmt(rec.theta_sd[i])
        row["time_mean_s"] = _fmt(rec.time_mean)
        row["time_sd_s"] = _fmt(rec.time_sd)
        row["delta_sq_mean"] = _fmt_sci(rec.delta_mean)
        row["delta_sq_sd"] = _fmt_sci(rec.delta_sd)
    if no_timing:
        for c in _TIMING_COLUMNS:
            row[c] = ""
    return row


def emit_csv(records: list[BenchRecord], fh: IO[str], no_timing: bool = False) -> None:
    """Write records with a fixed header order; '.' decimals, scientific
    notation for the Bellman error columns."""
    fh.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        row = record_row(rec, no_timing=no_timing)
        fh.write(",".join(row[c] for c in CSV_COLUMNS) + "\n")


def _log(log_fh: Optional[IO[str]], entry: dict) -> None:
    if log_fh is not None:
        log_fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _mean_sd(rows: np.ndarray) -> tuple[np.ndarray, Optional[np.ndarray]]:
    mean = rows.mean(axis=0)
    if rows.shape[0] < 2:
        return mean, None
    return mean, rows.std(axis=0, ddof=1)


def _caps(cfg: ExperimentConfig) -> tuple[Optional[int], Optional[float]]:
    mem = cfg.baselines.memory_cap_bytes or None
    tim = cfg.baselines.time_cap_s or None
    return mem, tim


def run_replication_study(
    cfg: ExperimentConfig,
    threads: int = 1,
    log_fh: Optional[IO[str]] = None,
) -> list[BenchRecord]:
    """Simulate-and-estimate replications for every configured method.

    Per-replication failures are logged and excluded from the aggregates
    rather than aborting the study.
    """
    model = build_career_model(
        cfg.model.p, cfg.model.T, cfg.model.beta, reward_kink=cfg.model.reward_kink
    )
    basis = build_basis(
        model, cfg.basis.knots_per_dim, cfg.basis.degree, cfg.basis.ridge
    )
    theta_true = np.asarray(cfg.model.theta_true)
    mem_cap, time_cap = _caps(cfg)
    reps = cfg.bench.replications

    def run_rep(r: int) -> list[dict]:
        out = []
        dataset = simulate_dataset(
            model, theta_true, cfg.sim.n_agents, seed=cfg.bench.seed + r
        )
        for method in cfg.bench.methods:
            entry = {"kind": "replication", "rep": r, "method": method}
            try:
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
                    solver_config=SolverConfig(
                        cfg.slstd.tolerance, cfg.slstd.max_passes
                    ),
                    grid_per_dim=cfg.baselines.grid_per_dim,
                    kw_states_per_period=cfg.baselines.kw_states_per_period,
                    kw_seed=cfg.bench.seed + r,
                    memory_cap_bytes=mem_cap,
                    time_cap_s=time_cap,
                    delta_sq_scope="full",
                )
                entry.update(
                    theta_hat=[float(x) for x in res.theta_hat],
                    log_likelihood=res.log_likelihood,
                    solve_time_s=res.solve_time_s,
                    delta_sq=res.delta_sq,
                    iterations=res.iterations,
                    converged=res.converged,
                    diverged_evals=res.diverged_evals,
                )
            except (MemoryCapExceeded, TimeCapExceeded) as exc:
                entry["cap"] = type(exc).__name__
                entry["error"] = str(exc)
            except Exception as exc:  # noqa: BLE001 - recorded, not fatal
                entry["error"] = str(exc)
            out.append(entry)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(run_rep, range(1, reps + 1)))
    else:
        per_rep = [run_rep(r) for r in range(1, reps + 1)]

    records = []
    for method in cfg.bench.methods:
        rows = []
        cap_status = None
        for rep_entries in per_rep:
            for entry in rep_entries:
                if entry["method"] != method:
                    continue
                _log(log_fh, entry)
                if "theta_hat" in entry:
                    rows.append(entry)
                elif "cap" in entry:
                    cap_status = (
                        "null_memory_cap"
                        if entry["cap"] == "MemoryCapExceeded"
                        else "null_time_cap"
                    )
        rec = BenchRecord(
            method=method,
            p=model.p,
            T=model.T,
            n_states=model.n_states,
            replications=len(rows),
        )
        if not rows:
            rec.status = cap_status or "ok"
            records.append(rec)
            continue
        theta = np.array([e["theta_hat"] for e in rows])
        times = np.array([[e["solve_time_s"]] for e in rows])
        deltas = np.array([[e["delta_sq"]] for e in rows])
        t_mean, t_sd = _mean_sd(theta)
        w_mean, w_sd = _mean_sd(times)
        d_mean, d_sd = _mean_sd(deltas)
        rec.theta_mean = tuple(t_mean)
        rec.theta_sd = None if t_sd is None else tuple(t_sd)
        rec.time_mean = float(w_mean[0])
        rec.time_sd = None if w_sd is None else float(w_sd[0])
        rec.delta_mean = float(d_mean[0])
        rec.delta_sd = None if d_sd is None else float(d_sd[0])
        records.append(rec)
    return records


def run_timing_study(
    cfg: ExperimentConfig,
    log_fh: Optional[IO[str]] = None,
) -> list[BenchRecord]:
    """Wall time to solve the Bellman equation at theta_true, per method and
    (p, T) cell; cap violations become null statuses instead of numbers."""
    theta_true = np.asarray(cfg.model.theta_true)
    mem_cap, time_cap = _caps(cfg)
    records = []
    for cell_idx, (p, T) in enumerate(cfg.bench.cells):
        model = build_career_model(
            p, T, cfg.model.beta, reward_kink=cfg.model.reward_kink
        )
        basis = build_basis(
            model, cfg.basis.knots_per_dim, cfg.basis.degree, cfg.basis.ridge
        )
        dataset = None
        for method in cfg.bench.methods:
            if method == "slstd" and dataset is None:
                dataset = simulate_dataset(
                    model,
                    theta_true,
                    cfg.sim.n_agents,
                    seed=cfg.bench.seed + 1000 * (cell_idx + 1),
                )
            rec = BenchRecord(
                method=method, p=p, T=T, n_states=model.n_states
            )
            times = []
            try:
                for _ in range(cfg.bench.timing_reps):
                    t0 = time.perf_counter()
                    if method == "slstd":
                        slstd_solve(
                            model,
                            basis,
                            theta_true,
                            dataset,
                            StepSchedule(cfg.slstd.c1, cfg.slstd.c2),
                            SolverConfig(
                                cfg.slstd.tolerance,
                                cfg.slstd.max_passes,
                                time_cap_s=time_cap,
                            ),
                        )
                    elif method == "sequential":
                        sequential_series_solve(
                            model,
                            basis,
                            theta_true,
                            grid_per_dim=cfg.baselines.grid_per_dim,
                            memory_cap_bytes=mem_cap,
                            time_cap_s=time_cap,
                        )
                    elif method == "kw":
                        kw_solve(
                            model,
                            theta_true,
                            states_per_period=cfg.baselines.kw_states_per_period,
                            seed=cfg.bench.seed + cell_idx,
                            memory_cap_bytes=mem_cap,
                            time_cap_s=time_cap,
                        )
                    elif method == "exact":
                        exact_solve(model, theta_true, memory_cap_bytes=mem_cap)
                    else:
                        raise ValueError(f"unknown method {method!r}")
                    times.append(time.perf_counter() - t0)
            except MemoryCapExceeded as exc:
                rec.status = "null_memory_cap"
                _log(
                    log_fh,
                    {
                        "kind": "timing",
                        "method": method,
                        "p": p,
                        "T": T,
                        "cap": "memory",
                        "error": str(exc),
                    },
                )
            except TimeCapExceeded as exc:
                rec.status = "null_time_cap"
                _log(
                    log_fh,
                    {
                        "kind": "timing",
                        "method": method,
                        "p": p,
                        "T": T,
                        "cap": "time",
                        "error": str(exc),
                    },
                )
            if rec.status == "ok":
                arr = np.array(times)
                rec.replications = len(times)
                rec.time_mean = float(arr.mean())
                rec.time_sd = float(arr.std(ddof=1)) if len(times) > 1 else None
                _log(
                    log_fh,
                    {
                        "kind": "timing",
                        "method": method,
                        "p": p,
                        "T": T,
                        "times": times,
                    },
                )
            records.append(rec)
    return records


@dataclass
class TraceResult:
    """Per-age diagnostics of the sequential method plus the matched
    whole-grid Bellman errors of the TD solver."""

    ages: np.ndarray               # 1..T
    seq_abs_err: np.ndarray        # max |sequential - exact| per age slice
    seq_target_trace: np.ndarray   # max |fit target| per age
    delta_sq_sequential: float
    delta_sq_slstd: float


def run_error_accumulation_trace(cfg: ExperimentConfig) -> TraceResult:
    """Back out how the per-age error of the sequential method compounds,
    on whatever model the config describes (the non-smooth reward variant is
    enabled with ``model.reward_kink = true``)."""
    model = build_career_model(
        cfg.model.p, cfg.model.T, cfg.model.beta, reward_kink=cfg.model.reward_kink
    )
    basis = build_basis(
        model, cfg.basis.knots_per_dim, cfg.basis.degree, cfg.basis.ridge
    )
    theta_true = np.asarray(cfg.model.theta_true)
    exact = exact_solve(model, theta_true)
    seq = sequential_series_solve(
        model, basis, theta_true, grid_per_dim=cfg.baselines.grid_per_dim
    )
    slice_len = model.strides[0]
    err = np.empty(model.T)
    for t in range(model.T):
        lo, hi = t * slice_len, (t + 1) * slice_len
        err[t] = float(np.max(np.abs(seq.table[lo:hi] - exact[lo:hi])))

    dataset = simulate_dataset(
        model, theta_true, cfg.sim.n_agents, seed=cfg.bench.seed
    )
    w, _ = slstd_solve(
        model,
        basis,
        theta_true,
        dataset,
        StepSchedule(cfg.slstd.c1, cfg.slstd.c2),
        SolverConfig(cfg.slstd.tolerance, cfg.slstd.max_passes),
    )
    d_slstd = bellman_error_report(
        model, theta_true, SplineValues(model, basis, w), scope="full"
    )
    d_seq = bellman_error_report(
        model, theta_true, TableValues(seq.table), scope="full"
    )
    return TraceResult(
        ages=np.arange(1, model.T + 1),
        seq_abs_err=err,
        seq_target_trace=seq.target_trace,
        delta_sq_sequential=d_seq,
        delta_sq_slstd=d_slstd,
    )
