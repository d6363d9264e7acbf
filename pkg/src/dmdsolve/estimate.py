"""Maximum-likelihood estimation with a pluggable inner Bellman solver.

The outer loop is a derivative-free simplex search; each candidate theta
triggers a fresh inner solve with identical data order and solver seed, so
the objective is a deterministic function of theta (common random numbers).
Transitions are deterministic in this model family, so the transition term
of the log likelihood is zero for datasets consistent with the model; the
consistency check runs once when the data are packed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from .baselines import (
    _action_values_from_table,
    exact_solve,
    kw_solve,
    sequential_series_solve,
)
from .basis import SplineBasis, build_basis
from .logit import logsumexp_rows
from .model import (
    CareerModel,
    pack_coords,
    rewards_from_features,
    transition_coords,
    unpack_coords,
)
from .slstd import (
    DivergenceError,
    SolverConfig,
    StepSchedule,
    TransitionPack,
    _as_pack,
    slstd_solve,
)
from .values import SplineValues, TableValues

SOLVER_NAMES = ("slstd", "sequential", "kw", "exact")

_DIVERGENCE_PENALTY = 1e15


def log_likelihood(model: CareerModel, data, theta: np.ndarray, values) -> float:
    """Average log choice probability of the observed actions.

    ``data`` is a dataset or prebuilt pack; ``values`` any view with
    ``values_at``.  Normalization is per decision record, so a single
    transition with equal action values scores log(1/3).
    """
    pack = _as_pack(model, data)
    nt = pack.term == 0
    theta = np.asarray(theta, dtype=float)
    rew = rewards_from_features(pack.feats[nt], theta)
    cont = values.values_at(pack.succ_packed[nt].ravel()).reshape(-1, 3)
    v = rew + model.beta * cont
    logp = v - logsumexp_rows(v)[:, None]
    chosen = logp[np.arange(logp.shape[0]), pack.actions[nt] - 1]
    return float(np.mean(chosen))


def bellman_error_report(
    model: CareerModel,
    theta: np.ndarray,
    values,
    scope: str = "full",
    dataset=None,
    memory_cap_bytes: int | None = None,
) -> float:
    """Sum of squared Bellman residuals over the full grid or visited states.

    Terminal states contribute (0 - V)^2; every other state the squared gap
    between the logit Emax of its action values (successor values read from
    ``values``) and V itself.
    """
    theta = np.asarray(theta, dtype=float)
    if scope == "full":
        from .baselines import _check_memory, memory_footprint
        from .logit import EULER_GAMMA

        _check_memory(memory_footprint(model), memory_cap_bytes)
        dense = np.asarray(values.dense(model))
        slice_len = model.strides[0]
        from .model import age_slice_coords

        total = float(np.sum(dense[(model.T - 1) * slice_len :] ** 2))
        coords = age_slice_coords(model, 0)
        for t in range(model.T - 1):
            coords[:, 0] = t
            v = _action_values_from_table(model, coords, dense, theta)
            rhs = EULER_GAMMA + logsumexp_rows(v)
            resid = rhs - dense[t * slice_len : (t + 1) * slice_len]
            total += float(resid @ resid)
        return total
    if scope == "visited":
        if dataset is None:
            raise ValueError("visited scope needs a dataset")
        from .logit import EULER_GAMMA
        from .model import reward_features_coords

        stream = (
            dataset.stream_packed()
            if hasattr(dataset, "stream_packed")
            else dataset.packed
        )
        packed = np.unique(stream)
        coords = unpack_coords(model, packed)
        vhat = values.values_at(packed)
        term = coords[:, 0] == model.T - 1
        total = float(np.sum(vhat[term] ** 2))
        base = coords[~term]
        if base.shape[0]:
            rew = rewards_from_features(reward_features_coords(model, base), theta)
            v = np.empty((base.shape[0], 3))
            for a in (1, 2, 3):
                succ = pack_coords(model, transition_coords(model, base, a))
                v[:, a - 1] = rew[:, a - 1] + model.beta * values.values_at(succ)
            resid = EULER_GAMMA + logsumexp_rows(v) - vhat[~term]
            total += float(resid @ resid)
        return total
    raise ValueError(f"scope must be 'full' or 'visited', got {scope!r}")


@dataclass
class EstimationResult:
    theta_hat: np.ndarray
    log_likelihood: float
    solve_time_s: float        # mean wall time of one inner solve
    n_solves: int
    iterations: int
    converged: bool
    diverged_evals: int
    delta_sq: Optional[float] = None
    values: object = None
    message: str = ""


def _make_inner_solver(
    model: CareerModel,
    pack: TransitionPack,
    solver: str,
    basis: Optional[SplineBasis],
    schedule: StepSchedule,
    config: SolverConfig,
    grid_per_dim: int,
    kw_states_per_period: int,
    kw_seed: int,
    memory_cap_bytes: int | None,
    time_cap_s: float | None,
):
    if solver == "slstd":
        if basis is None:
            raise ValueError("the slstd solver needs a basis")

        def solve(theta):
            w, diag = slstd_solve(model, basis, theta, pack, schedule, config)
            return SplineValues(model, basis, w), diag.wall_time_s

    elif solver == "exact":

        def solve(theta):
            t0 = time.perf_counter()
            table = exact_solve(model, theta, memory_cap_bytes)
            return TableValues(table), time.perf_counter() - t0

    elif solver == "sequential":
        if basis is None:
            raise ValueError("the sequential solver needs a basis")

        def solve(theta):
            t0 = time.perf_counter()
            sol = sequential_series_solve(
                model,
                basis,
                theta,
                grid_per_dim=grid_per_dim,
                memory_cap_bytes=memory_cap_bytes,
                time_cap_s=time_cap_s,
            )
            return TableValues(sol.table), time.perf_counter() - t0

    elif solver == "kw":

        def solve(theta):
            t0 = time.perf_counter()
            sol = kw_solve(
                model,
                theta,
                states_per_period=kw_states_per_period,
                seed=kw_seed,
                memory_cap_bytes=memory_cap_bytes,
                time_cap_s=time_cap_s,
            )
            return TableValues(sol.table), time.perf_counter() - t0

    else:
        raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVER_NAMES}")
    return solve


def estimate_theta(
    model: CareerModel,
    dataset,
    solver: str = "slstd",
    basis: Optional[SplineBasis] = None,
    theta0=None,
    xtol: float = 1e-3,
    ftol: float = 1e-6,
    max_iter: int = 500,
    bounds: tuple[float, float] = (-50.0, 50.0),
    schedule: Optional[StepSchedule] = None,
    solver_config: Optional[SolverConfig] = None,
    grid_per_dim: int = 5,
    kw_states_per_period: int = 100,
    kw_seed: int = 0,
    memory_cap_bytes: int | None = None,
    time_cap_s: float | None = None,
    delta_sq_scope: Optional[str] = None,
) -> EstimationResult:
    """Nested maximum likelihood: simplex search over theta around a fresh
    inner Bellman solve per candidate.

    Inner-solver divergence turns into a penalized objective value rather
    than an abort; the count of penalized evaluations is reported.
    """
    pack = _as_pack(model, dataset)
    if solver in ("slstd", "sequential") and basis is None:
        basis = build_basis(model)
    theta0 = np.ones(4) if theta0 is None else np.asarray(theta0, dtype=float)
    schedule = schedule or StepSchedule()
    solver_config = solver_config or SolverConfig()
    solve = _make_inner_solver(
        model,
        pack,
        solver,
        basis,
        schedule,
        solver_config,
        grid_per_dim,
        kw_states_per_period,
        kw_seed,
        memory_cap_bytes,
        time_cap_s,
    )

    solve_times: list[float] = []
    diverged = 0

    def negative_ll(x):
        nonlocal diverged
        try:
            values, secs = solve(x)
        except DivergenceError:
            diverged += 1
            return _DIVERGENCE_PENALTY
        solve_times.append(secs)
        return -log_likelihood(model, pack, x, values)

    res = optimize.minimize(
        negative_ll,
        theta0,
        method="Nelder-Mead",
        bounds=[bounds] * 4,
        options={
            "xatol": xtol,
            "fatol": ftol,
            "maxiter": max_iter,
            "maxfev": 4 * max_iter,
        },
    )
    theta_hat = np.asarray(res.x, dtype=float)
    try:
        values, secs = solve(theta_hat)
        solve_times.append(secs)
        ll = log_likelihood(model, pack, theta_hat, values)
        final_ok = True
    except DivergenceError:
        diverged += 1
        values, ll, final_ok = None, -np.inf, False

    delta_sq = None
    if delta_sq_scope is not None and values is not None:
        delta_sq = bellman_error_report(
            model,
            theta_hat,
            values,
            scope=delta_sq_scope,
            dataset=pack,
            memory_cap_bytes=memory_cap_bytes,
        )

    return EstimationResult(
        theta_hat=theta_hat,
        log_likelihood=ll,
        solve_time_s=float(np.mean(solve_times)) if solve_times else float("nan"),
        n_solves=len(solve_times),
        iterations=int(res.nit),
        converged=bool(res.success) and final_ok,
        diverged_evals=diverged,
        delta_sq=delta_sq,
        values=values,
        message=str(res.message),
    )
