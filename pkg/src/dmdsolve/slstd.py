"""Stochastic-approximation solver for the Bellman equation on a spline basis.

The value function is approximated as ``V(s) ~ phi(s)' w`` and w is driven to
the root of the basis-weighted fixed-point condition by temporal-difference
updates along the observed state stream: agents are concatenated head to
tail, terminal visits pull ``phi(s)' w`` toward zero, and the step size
``c1 / (ell + c2)`` decays over a global step counter that never resets.
Convergence is judged by the weight change over a full pass through the
data, not per step (per-step changes shrink mechanically with the step size).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .backend import basis_kernel_args, kernels_for
from .basis import SplineBasis
from .logit import (
    EULER_GAMMA,
    action_values,
    bellman_operator,
    choice_probabilities,
    logsumexp_rows,
    softmax_rows,
)
from .model import (
    CareerModel,
    State,
    pack_coords,
    reward_features_coords,
    rewards_from_features,
    transition_coords,
    unpack_coords,
)


class DivergenceError(RuntimeError):
    """Raised when the weight iterate leaves the finite / norm-cap region."""

    def __init__(self, pass_index: int, step: int, norm_cap: float):
        super().__init__(
            f"weight iterate exceeded the norm cap {norm_cap:g} "
            f"at pass {pass_index}, step {step}"
        )
        self.pass_index = pass_index
        self.step = step


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule eta_ell = c1 / (ell + c2).

    Any c1 > 0, c2 >= 0 satisfies the divergent-sum / summable-squares
    conditions the stochastic-approximation iteration needs.  Too small c1 or
    too large c2 stalls the iteration near its initial point.
    """

    c1: float = 20.0
    c2: float = 500.0

    def __post_init__(self) -> None:
        if self.c1 <= 0.0:
            raise ValueError(f"c1 must be positive; got {self.c1}")
        if self.c2 < 0.0:
            raise ValueError(f"c2 must be non-negative; got {self.c2}")

    def eta(self, ell: int) -> float:
        return self.c1 / (ell + self.c2)


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-2
    max_passes: int = 60
    w0: Optional[np.ndarray] = None
    norm_cap: float = 1e8
    time_cap_s: Optional[float] = None

    def __post_init__(self) -> None:
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be at least 1")


@dataclass
class SlstdDiagnostics:
    passes: int
    steps: int
    final_delta_w: float
    wall_time_s: float
    converged: bool


@dataclass
class TransitionPack:
    """Array view of a dataset in solver order (agent-major, time within).

    Rows cover every observed state visit including the terminal arrival, so
    a pass of n agents with horizon T performs n*T updates.  Construction
    validates that each stored successor matches the deterministic transition
    rule and raises naming the offending record otherwise.
    """

    model: CareerModel
    n_agents: int
    horizon: int
    packed: np.ndarray          # (N,) packed state index, stream order
    state_coords: np.ndarray    # (N, p-1) continuous coords
    state_lag: np.ndarray       # (N,)
    term: np.ndarray            # (N,) uint8
    succ_coords: np.ndarray     # (N, 3, p-1)
    succ_lag: np.ndarray        # (N, 3)
    succ_packed: np.ndarray     # (N, 3)
    feats: np.ndarray           # (N, 2) reward regressors
    actions: np.ndarray         # (N,) observed action, 0 on terminal rows

    @property
    def n_records(self) -> int:
        return self.packed.shape[0]

    @classmethod
    def from_dataset(cls, model: CareerModel, dataset) -> "TransitionPack":
        states = np.asarray(dataset.states, dtype=np.int64)
        actions = np.asarray(dataset.actions, dtype=np.int64)
        n, horizon = states.shape
        if actions.shape != (n, horizon - 1):
            raise ValueError("actions array must be (n, T-1)")
        stream = states.reshape(-1)
        coords = unpack_coords(model, stream)
        term = (coords[:, 0] == model.T - 1).astype(np.uint8)

        p = model.p
        succ_coords = np.zeros((stream.size, 3, p), dtype=np.int64)
        nonterm = term == 0
        base = coords[nonterm]
        for a in (1, 2, 3):
            succ_coords[nonterm, a - 1, :] = transition_coords(model, base, a)
        succ_packed = pack_coords(
            model, succ_coords.reshape(-1, p)
        ).reshape(stream.size, 3)

        # observed action per stream row; terminal rows carry 0
        act_stream = np.zeros(stream.size, dtype=np.int64)
        act_stream.reshape(n, horizon)[:, :-1] = actions

        # consistency: the stored next state must equal transition(s, a)
        obs_next = states[:, 1:].reshape(-1)
        row_next = succ_packed.reshape(n, horizon, 3)[:, :-1, :]
        expected = np.take_along_axis(
            row_next.reshape(-1, 3), (actions.reshape(-1, 1) - 1), axis=1
        ).ravel()
        bad = np.nonzero(obs_next != expected)[0]
        if bad.size:
            j = int(bad[0])
            raise ValueError(
                f"dataset record (agent={j // (horizon - 1)}, "
                f"t={j % (horizon - 1) + 1}) is inconsistent with the "
                "transition rule"
            )

        return cls(
            model=model,
            n_agents=n,
            horizon=horizon,
            packed=np.ascontiguousarray(stream),
            state_coords=np.ascontiguousarray(coords[:, :-1]),
            state_lag=np.ascontiguousarray(coords[:, -1]),
            term=np.ascontiguousarray(term),
            succ_coords=np.ascontiguousarray(succ_coords[:, :, :-1]),
            succ_lag=np.ascontiguousarray(succ_coords[:, :, -1]),
            succ_packed=np.ascontiguousarray(succ_packed),
            feats=np.ascontiguousarray(reward_features_coords(model, coords)),
            actions=act_stream,
        )


def _as_pack(model: CareerModel, data) -> TransitionPack:
    if isinstance(data, TransitionPack):
        return data
    return TransitionPack.from_dataset(model, data)


def value_hat(basis: SplineBasis, w: np.ndarray, s: State) -> float:
    """Approximate value phi(s)' w at a single state."""
    idx, vals = basis.active([float(c) for c in s.coords[:-1]], int(s.coords[-1]))
    return float(w[idx] @ vals)


def slstd_step(
    model: CareerModel,
    basis: SplineBasis,
    theta: np.ndarray,
    w: np.ndarray,
    s: State,
    eta: float,
) -> np.ndarray:
    """Reference single update; returns the new weight vector.

    Spelled out with explicit choice probabilities and per-action operator
    values.  The production pass uses the algebraically identical Emax form;
    tests compare the two routes.
    """
    if eta < 0.0:
        raise ValueError("step size must be non-negative")
    phi = basis.evaluate(s)
    vhat = float(phi @ w)
    if s.coords[0] == model.T - 1:
        return w + eta * phi * (0.0 - vhat)

    def value_fn(state: State) -> float:
        return value_hat(basis, w, state)

    v = action_values(model, value_fn, s, theta)
    probs = choice_probabilities(v)
    tvals = np.array(
        [bellman_operator(model, value_fn, s, a, theta) for a in (1, 2, 3)]
    )
    update = float(np.sum(probs * (tvals - vhat)))
    out = w + eta * phi * update
    if not np.all(np.isfinite(out)):
        raise DivergenceError(0, 0, np.inf)
    return out


def slstd_solve(
    model: CareerModel,
    basis: SplineBasis,
    theta: np.ndarray,
    data,
    schedule: StepSchedule | None = None,
    config: SolverConfig | None = None,
) -> tuple[np.ndarray, SlstdDiagnostics]:
    """Run the stochastic-approximation iteration to (approximate)
    convergence over repeated passes of the observed transitions.

    ``data`` is a dataset (states/actions arrays) or a prebuilt
    :class:`TransitionPack`; passing the pack lets an outer likelihood
    optimizer reuse the arrays across candidate parameter vectors, which also
    makes the solve deterministic in theta.
    """
    schedule = schedule or StepSchedule()
    config = config or SolverConfig()
    pack = _as_pack(model, data)
    if pack.n_records == 0:
        raise ValueError("dataset is empty")

    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if config.w0 is None:
        w = np.zeros(basis.k)
    else:
        w = np.array(config.w0, dtype=np.float64, copy=True)
        if w.shape != (basis.k,):
            raise ValueError(f"w0 must have shape ({basis.k},)")

    kern = kernels_for(basis)
    kargs = basis_kernel_args(basis)
    start = time.perf_counter()
    ell = 1
    delta = np.inf
    converged = False
    n_pass = 0
    for n_pass in range(1, config.max_passes + 1):
        w_before = w.copy()
        ell, fail = kern.slstd_run_pass(
            w,
            pack.state_coords,
            pack.state_lag,
            pack.term,
            pack.succ_coords,
            pack.succ_lag,
            pack.feats,
            theta,
            model.beta,
            schedule.c1,
            schedule.c2,
            ell,
            *kargs,
            config.norm_cap,
        )
        if fail >= 0:
            raise DivergenceError(n_pass, int(fail), config.norm_cap)
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > config.norm_cap:
            raise DivergenceError(n_pass, pack.n_records - 1, config.norm_cap)
        delta = float(np.linalg.norm(w - w_before))
        if delta <= config.tolerance:
            converged = True
            break
        if (
            config.time_cap_s is not None
            and time.perf_counter() - start > config.time_cap_s
        ):
            break
    wall = time.perf_counter() - start
    diag = SlstdDiagnostics(
        passes=n_pass,
        steps=ell - 1,
        final_delta_w=delta,
        wall_time_s=wall,
        converged=converged,
    )
    return w, diag


def fixed_point_oracle(
    model: CareerModel,
    basis: SplineBasis,
    theta: np.ndarray,
    sample_packed: np.ndarray,
    damping: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> np.ndarray:
    """Solve the basis-weighted fixed-point condition directly.

    Freezes the choice probabilities and conditional shock means at the
    current iterate, solves the resulting linear system over the sample
    states, and steps toward the solution (fraction ``damping``) until the
    first-order-condition residual norm drops below ``tol``.  Full steps
    converge in a handful of iterations on logit problems; lower the damping
    if an instance oscillates.  Only meant as a test oracle on small
    instances (dense k x k solves).
    """
    packed = np.asarray(sample_packed, dtype=np.int64).ravel()
    coords = unpack_coords(model, packed)
    term = coords[:, 0] == model.T - 1
    design = basis.design_matrix(
        coords[:, :-1].astype(float), coords[:, -1]
    )
    nt = ~term
    base = coords[nt]
    succ_design = []
    for a in (1, 2, 3):
        sc = transition_coords(model, base, a)
        succ_design.append(
            basis.design_matrix(sc[:, :-1].astype(float), sc[:, -1])
        )
    rew = rewards_from_features(reward_features_coords(model, base), theta)

    phi_nt = design[nt]
    vhat_term_design = design[term]
    w = np.zeros(basis.k)
    for _ in range(max_iter):
        cont = np.stack([succ_design[a] @ w for a in range(3)], axis=1)
        v = rew + model.beta * cont
        lse = logsumexp_rows(v)
        # direct residual of the weak first-order condition at the current w
        foc = phi_nt.T @ (phi_nt @ w - (EULER_GAMMA + lse))
        if vhat_term_design.shape[0]:
            foc = foc + vhat_term_design.T @ (vhat_term_design @ w)
        if np.linalg.norm(foc) <= tol:
            return w
        probs = softmax_rows(v)
        # frozen-coefficient linear system: A w = b
        phi_bar = sum(probs[:, a][:, None] * succ_design[a] for a in range(3))
        a_mat = design.T @ design - model.beta * (phi_nt.T @ phi_bar)
        # P-weighted flow-plus-shock term: gamma + lse(v) - beta * P.phi' w
        c = EULER_GAMMA + lse - model.beta * np.sum(probs * cont, axis=1)
        b = phi_nt.T @ c
        w_new = np.linalg.lstsq(a_mat, b, rcond=None)[0]
        w = w + damping * (w_new - w)
    raise RuntimeError("fixed-point oracle did not converge")


def foc_residual(
    model: CareerModel,
    basis: SplineBasis,
    theta: np.ndarray,
    w: np.ndarray,
    sample_packed: np.ndarray,
) -> np.ndarray:
    """Left side of the basis-weighted first-order condition at w.

    Zero (up to solver tolerance) at the oracle solution; the TD update
    direction at a single state is the negative of this integrand.
    """
    packed = np.asarray(sample_packed, dtype=np.int64).ravel()
    coords = unpack_coords(model, packed)
    term = coords[:, 0] == model.T - 1
    design = basis.design_matrix(coords[:, :-1].astype(float), coords[:, -1])
    vhat = design @ w
    resid = np.empty(packed.size)
    resid[term] = vhat[term] - 0.0
    if np.any(~term):
        base = coords[~term]
        rew = rewards_from_features(reward_features_coords(model, base), theta)
        v = np.empty((base.shape[0], 3))
        for a in (1, 2, 3):
            sc = transition_coords(model, base, a)
            v[:, a - 1] = rew[:, a - 1] + model.beta * (
                basis.design_matrix(sc[:, :-1].astype(float), sc[:, -1]) @ w
            )
        resid[~term] = vhat[~term] - (EULER_GAMMA + logsumexp_rows(v))
    return design.T @ resid
