"""Reference solvers: exact backward induction, the sequential series method,
and the sampled-interpolation method.

The two approximate baselines follow the classic period-by-period template:
work backward over ages, fit a per-age approximation, and materialize the
fitted values for the whole age slice into a dense table (the next age's
targets read successors from that table).  Storing all grid values is what
makes these methods memory- and state-space-bound, in contrast with the TD
solver which only keeps basis weights; the cap machinery below turns the
blowup into explicit statuses instead of crashes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .basis import SplineBasis
from .logit import EULER_GAMMA, logsumexp_rows
from .model import (
    CareerModel,
    age_slice_coords,
    pack_coords,
    reward_features_coords,
    rewards_from_features,
    transition_coords,
)


class MemoryCapExceeded(RuntimeError):
    """A solver's planned dense allocations exceed the configured cap."""

    def __init__(self, required: int, cap: int):
        super().__init__(
            f"solver needs about {required} bytes of dense value-table "
            f"storage, above the {cap}-byte cap"
        )
        self.required = required
        self.cap = cap


class TimeCapExceeded(RuntimeError):
    """A solve ran past the configured wall-time cap."""

    def __init__(self, elapsed: float, cap: float):
        super().__init__(f"solve exceeded the {cap:g}s time cap ({elapsed:.1f}s)")
        self.elapsed = elapsed
        self.cap = cap


def memory_footprint(model: CareerModel) -> int:
    """Bytes of a dense float64 value table over the full grid."""
    return 8 * model.n_states


def dense_solver_budget(model: CareerModel) -> int:
    """Planned bytes for a table-filling solver: the kept full table plus the
    per-age working set (coordinate grid, per-action successor scratch, and
    value/feature arrays), all proportional to the slice size."""
    slice_n = model.n_states // model.T
    return memory_footprint(model) + (16 * model.p + 88) * slice_n


def _check_memory(required: int, cap: int | None) -> None:
    if cap is not None and cap > 0 and required > cap:
        raise MemoryCapExceeded(required, cap)


def _check_time(start: float, cap: float | None) -> None:
    if cap is not None and cap > 0:
        elapsed = time.perf_counter() - start
        if elapsed > cap:
            raise TimeCapExceeded(elapsed, cap)


def _action_values_from_table(
    model: CareerModel, coords: np.ndarray, table: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    """(n, 3) action values for non-terminal rows, successors read from the
    dense table."""
    rew = rewards_from_features(reward_features_coords(model, coords), theta)
    v = np.empty((coords.shape[0], 3))
    for a in (1, 2, 3):
        succ = pack_coords(model, transition_coords(model, coords, a))
        v[:, a - 1] = rew[:, a - 1] + model.beta * table[succ]
    return v


def exact_solve(
    model: CareerModel,
    theta: np.ndarray,
    memory_cap_bytes: int | None = None,
) -> np.ndarray:
    """Exact value table by backward induction over ages.

    Terminal states carry 0; every earlier state gets the closed-form logit
    Emax of its three action values.  Returns a dense float64 vector indexed
    by packed state index.
    """
    _check_memory(memory_footprint(model), memory_cap_bytes)
    table = np.zeros(model.n_states)
    slice_len = model.strides[0]
    coords = age_slice_coords(model, 0)
    for t in range(model.T - 2, -1, -1):
        coords[:, 0] = t
        v = _action_values_from_table(model, coords, table, theta)
        table[t * slice_len : (t + 1) * slice_len] = EULER_GAMMA + logsumexp_rows(v)
    return table


@dataclass
class SequentialSolution:
    """Per-age spline fits plus the dense table they were evaluated into."""

    table: np.ndarray
    age_weights: list
    target_trace: np.ndarray  # per-age max |fit target|; terminal entry 0
    age_basis: SplineBasis

    @property
    def k_per_age(self) -> int:
        return self.age_basis.k


def _age_grid(model: CareerModel, grid_per_dim: int) -> np.ndarray:
    """Tensor sample grid over the non-age dimensions (lag fully crossed)."""
    if grid_per_dim < 2:
        raise ValueError("grid_per_dim must be at least 2")
    axes = []
    for size in model.dim_sizes[1:-1]:
        pts = np.unique(
            np.round(np.linspace(0.0, size - 1.0, grid_per_dim)).astype(np.int64)
        )
        axes.append(pts)
    axes.append(np.arange(model.dim_sizes[-1], dtype=np.int64))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def sequential_series_solve(
    model: CareerModel,
    basis: SplineBasis,
    theta: np.ndarray,
    grid_per_dim: int = 5,
    memory_cap_bytes: int | None = None,
    time_cap_s: float | None = None,
) -> SequentialSolution:
    """Backward-induction baseline with a fresh spline fit per age.

    At each age the Emax targets are computed on a small tensor grid using
    the already-filled next-age slice, a per-age weight vector is fitted by
    least squares (ridge fallback when underdetermined), and the fitted
    values are evaluated into the age slice of the dense table.  The basis
    hyperparameters (knots, degree, ridge) are taken from ``basis``.
    """
    from .values import SplineValues  # local import to avoid a cycle

    _check_memory(dense_solver_budget(model), memory_cap_bytes)
    start = time.perf_counter()

    age_basis = SplineBasis(
        dim_sizes=model.dim_sizes[1:-1],
        knots_per_dim=basis.knots_per_dim,
        degree=basis.degree,
        n_lag=model.dim_sizes[-1],
        ridge=basis.ridge,
    )
    table = np.zeros(model.n_states)
    slice_len = model.strides[0]
    slice_coords = age_slice_coords(model, 0)
    grid_rest = _age_grid(model, grid_per_dim)
    grid_coords = np.empty((grid_rest.shape[0], model.p), dtype=np.int64)
    grid_coords[:, 1:] = grid_rest
    grid_design = age_basis.design_matrix(
        grid_rest[:, :-1].astype(float), grid_rest[:, -1]
    )

    age_weights: list = [None] * model.T
    age_weights[model.T - 1] = np.zeros(age_basis.k)
    trace = np.zeros(model.T)

    eval_model_coords = slice_coords[:, 1:]
    spline = None
    for t in range(model.T - 2, -1, -1):
        _check_time(start, time_cap_s)
        grid_coords[:, 0] = t
        v = _action_values_from_table(model, grid_coords, table, theta)
        targets = EULER_GAMMA + logsumexp_rows(v)
        r_t = _ls_fit(grid_design, targets, age_basis.ridge, age_basis.k)
        age_weights[t] = r_t
        trace[t] = float(np.max(np.abs(targets)))
        spline = SplineValues(model, age_basis, r_t)
        table[t * slice_len : (t + 1) * slice_len] = spline.values_on(
            eval_model_coords
        )
    return SequentialSolution(
        table=table, age_weights=age_weights, target_trace=trace, age_basis=age_basis
    )


def _ls_fit(design: np.ndarray, y: np.ndarray, ridge: float, k: int) -> np.ndarray:
    if design.shape[0] >= k:
        w, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank == k:
            return w
    if ridge <= 0.0:
        raise np.linalg.LinAlgError(
            "rank-deficient per-age design and ridge fallback disabled"
        )
    gram = design.T @ design
    lam = ridge * np.trace(gram) / k
    return np.linalg.solve(gram + lam * np.eye(k), design.T @ y)


@dataclass
class KwSolution:
    """Per-age interpolation coefficients plus the dense filled table."""

    table: np.ndarray
    age_coeffs: np.ndarray  # (T, 3): intercept, max, spread weights
    seed: int
    states_per_period: int


def kw_solve(
    model: CareerModel,
    theta: np.ndarray,
    states_per_period: int = 100,
    seed: int = 0,
    memory_cap_bytes: int | None = None,
    time_cap_s: float | None = None,
) -> KwSolution:
    """Sampled-interpolation baseline (documented reconstruction).

    Per age, a random subset of the slice gets exact logit Emax values, a
    three-parameter interpolant in (max, max - mean) of the action values is
    fitted to them, and the interpolant is evaluated into the whole age slice
    of the dense table.  Sampling uses its own seeded generator so solves are
    reproducible.
    """
    if states_per_period < 3:
        raise ValueError("states_per_period must be at least 3")
    _check_memory(dense_solver_budget(model), memory_cap_bytes)
    start = time.perf_counter()
    rng = np.random.default_rng(seed)

    table = np.zeros(model.n_states)
    slice_len = model.strides[0]
    coords = age_slice_coords(model, 0)
    age_coeffs = np.zeros((model.T, 3))

    for t in range(model.T - 2, -1, -1):
        _check_time(start, time_cap_s)
        coords[:, 0] = t
        m = min(states_per_period, slice_len)
        pick = rng.choice(slice_len, size=m, replace=False)
        sampled = coords[pick]
        v = _action_values_from_table(model, sampled, table, theta)
        emax = EULER_GAMMA + logsumexp_rows(v)
        mx = v.max(axis=1)
        spread = mx - v.mean(axis=1)
        design = np.column_stack([np.ones(m), mx, spread])
        alpha = np.linalg.lstsq(design, emax, rcond=None)[0]
        age_coeffs[t] = alpha

        v_all = _action_values_from_table(model, coords, table, theta)
        mx_all = v_all.max(axis=1)
        spread_all = mx_all - v_all.mean(axis=1)
        table[t * slice_len : (t + 1) * slice_len] = (
            alpha[0] + alpha[1] * mx_all + alpha[2] * spread_all
        )
    return KwSolution(
        table=table,
        age_coeffs=age_coeffs,
        seed=seed,
        states_per_period=states_per_period,
    )
