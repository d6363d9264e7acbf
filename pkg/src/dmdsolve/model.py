"""Model primitives for the finite-horizon career-decision family.

State coordinates are 0-based grid indices packed row-major (last dimension
fastest).  Coordinate roles:

* ``coords[0]`` — age index; the agent's age is ``coords[0] + 1`` and runs
  from 1 to T, with age T terminal.
* ``coords[1]`` — completed years of schooling.
* ``coords[2]`` — work experience (models with p >= 4).
* ``coords[3]`` — extra accumulator counting home spells (p = 5 only).
* ``coords[-1]`` — previous-period choice minus one (three values).

Actions are 1 (school), 2 (work), 3 (home).  Transitions are deterministic:
every action advances age by one, action 1 adds a year of schooling, action 2
a year of experience, action 3 only ages the agent (and bumps the accumulator
when p = 5).  Accumulators saturate at T - 1 so transitions never leave the
grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

ACTIONS = (1, 2, 3)
N_ACTIONS = 3
THETA_DIM = 4


class State(NamedTuple):
    """A grid point together with its packed linear index."""

    coords: tuple[int, ...]
    index: int


@dataclass(frozen=True)
class CareerModel:
    """Immutable specification of one career-decision model instance.

    Attributes
    ----------
    p : int
        Number of state dimensions (3, 4 or 5).
    T : int
        Terminal age; decisions happen at ages 1..T-1.
    beta : float
        Discount factor in [0, 1).
    reward_kink : bool
        When True, the work reward gains a non-smooth bonus
        ``theta3 * max(0, experience - T/2)``.  Used to probe error
        accumulation in period-by-period approximation methods.
    """

    p: int
    T: int
    beta: float = 0.95
    reward_kink: bool = False
    dim_sizes: tuple[int, ...] = field(init=False)
    strides: tuple[int, ...] = field(init=False)
    n_states: int = field(init=False)

    def __post_init__(self) -> None:
        if self.p not in (3, 4, 5):
            raise ValueError(f"p must be one of 3, 4, 5; got {self.p}")
        if self.T < 2:
            raise ValueError(f"T must be at least 2; got {self.T}")
        if not (0.0 <= self.beta < 1.0):
            raise ValueError(f"beta must lie in [0, 1); got {self.beta}")
        dims = (self.T,) * (self.p - 1) + (N_ACTIONS,)
        strides = np.concatenate([np.cumprod(dims[::-1])[-2::-1], [1]])
        object.__setattr__(self, "dim_sizes", dims)
        object.__setattr__(self, "strides", tuple(int(s) for s in strides))
        object.__setattr__(self, "n_states", int(np.prod(dims)))

    @property
    def n_continuous(self) -> int:
        """Number of non-categorical dimensions (everything but the lag)."""
        return self.p - 1

    def state(self, coords: Sequence[int]) -> State:
        return State(tuple(int(c) for c in coords), pack_state(self, coords))

    def initial_state(self) -> State:
        """Age 1, no accumulated capital, previous choice = home."""
        coords = [0] * self.p
        coords[-1] = N_ACTIONS - 1
        return self.state(coords)


def build_career_model(
    p: int, T: int, beta: float = 0.95, reward_kink: bool = False
) -> CareerModel:
    """Construct the career-decision model with p dimensions and horizon T."""
    return CareerModel(p=p, T=T, beta=beta, reward_kink=reward_kink)


def pack_state(model: CareerModel, coords: Sequence[int]) -> int:
    """Mixed-radix encoding of grid coordinates into [0, n_states)."""
    if len(coords) != model.p:
        raise ValueError(f"expected {model.p} coordinates, got {len(coords)}")
    idx = 0
    for c, size, stride in zip(coords, model.dim_sizes, model.strides):
        c = int(c)
        if not 0 <= c < size:
            raise ValueError(f"coordinate {c} out of range [0, {size})")
        idx += c * stride
    return idx


def unpack_state(model: CareerModel, index: int) -> State:
    """Inverse of :func:`pack_state`."""
    index = int(index)
    if not 0 <= index < model.n_states:
        raise ValueError(f"index {index} out of range [0, {model.n_states})")
    rem = index
    coords = []
    for stride in model.strides:
        coords.append(rem // stride)
        rem %= stride
    return State(tuple(coords), index)


def is_terminal(model: CareerModel, s: State) -> bool:
    """True when the agent has reached the terminal age T."""
    return s.coords[0] == model.T - 1


def reward_features(model: CareerModel, s: State) -> tuple[float, float]:
    """Per-state regressors (x1, x2) such that the flow rewards are
    ``[theta1*x1, theta2*x1 + theta3*x2, theta4]``.

    x1 is schooling; x2 is experience, augmented by the kink bonus when the
    non-smooth variant is enabled.  Models with p = 3 have no experience
    dimension, so x2 = 0 there.
    """
    x1 = float(s.coords[1])
    if model.p == 3:
        return x1, 0.0
    x2 = float(s.coords[2])
    if model.reward_kink:
        x2 += max(0.0, x2 - model.T / 2.0)
    return x1, x2


def reward(model: CareerModel, s: State, a: int, theta: np.ndarray) -> float:
    """Deterministic flow reward for action a at state s.

    The taste shock is additive and handled by the logit layer, not here.
    """
    if a not in ACTIONS:
        raise ValueError(f"action must be in {ACTIONS}; got {a}")
    if is_terminal(model, s):
        raise ValueError("terminal states yield no reward")
    theta = np.asarray(theta, dtype=float)
    x1, x2 = reward_features(model, s)
    if a == 1:
        return float(theta[0] * x1)
    if a == 2:
        return float(theta[1] * x1 + theta[2] * x2)
    return float(theta[3])


def transition(model: CareerModel, s: State, a: int) -> State:
    """Deterministic successor of (s, a); raises on terminal s."""
    if a not in ACTIONS:
        raise ValueError(f"action must be in {ACTIONS}; got {a}")
    if is_terminal(model, s):
        raise ValueError("cannot transition from a terminal state")
    cap = model.T - 1
    coords = list(s.coords)
    coords[0] += 1
    if a == 1:
        coords[1] = min(coords[1] + 1, cap)
    elif a == 2 and model.p >= 4:
        coords[2] = min(coords[2] + 1, cap)
    elif a == 3 and model.p == 5:
        coords[3] = min(coords[3] + 1, cap)
    coords[-1] = a - 1
    return model.state(coords)


# ---------------------------------------------------------------------------
# Vectorized helpers used by the sweep-style solvers.  These operate on 2-D
# int64 arrays of coordinates (one row per state) instead of State objects.
# ---------------------------------------------------------------------------


def age_slice_coords(model: CareerModel, age_index: int) -> np.ndarray:
    """All grid coordinates with the given age index, in packed order."""
    if not 0 <= age_index < model.T:
        raise ValueError(f"age index {age_index} out of range [0, {model.T})")
    rest = model.dim_sizes[1:]
    grids = np.indices(rest).reshape(len(rest), -1)
    coords = np.empty((grids.shape[1], model.p), dtype=np.int64)
    coords[:, 0] = age_index
    coords[:, 1:] = grids.T
    return coords


def pack_coords(model: CareerModel, coords: np.ndarray) -> np.ndarray:
    """Vectorized mixed-radix packing of an (n, p) coordinate array."""
    strides = np.asarray(model.strides, dtype=np.int64)
    return np.asarray(coords, dtype=np.int64) @ strides


def unpack_coords(model: CareerModel, packed: np.ndarray) -> np.ndarray:
    """Vectorized inverse of :func:`pack_coords`; returns an (n, p) array."""
    rem = np.asarray(packed, dtype=np.int64)
    coords = np.empty(rem.shape + (model.p,), dtype=np.int64)
    for j, stride in enumerate(model.strides):
        coords[..., j] = rem // stride
        rem = rem % stride
    return coords


def transition_coords(model: CareerModel, coords: np.ndarray, a: int) -> np.ndarray:
    """Vectorized successor coordinates for one action (rows non-terminal)."""
    cap = model.T - 1
    out = np.array(coords, dtype=np.int64, copy=True)
    out[:, 0] += 1
    if a == 1:
        np.minimum(out[:, 1] + 1, cap, out=out[:, 1])
    elif a == 2 and model.p >= 4:
        np.minimum(out[:, 2] + 1, cap, out=out[:, 2])
    elif a == 3 and model.p == 5:
        np.minimum(out[:, 3] + 1, cap, out=out[:, 3])
    out[:, -1] = a - 1
    return out


def reward_features_coords(model: CareerModel, coords: np.ndarray) -> np.ndarray:
    """Vectorized (x1, x2) reward regressors for an (n, p) coordinate array."""
    n = coords.shape[0]
    feats = np.zeros((n, 2), dtype=float)
    feats[:, 0] = coords[:, 1]
    if model.p >= 4:
        x2 = coords[:, 2].astype(float)
        if model.reward_kink:
            x2 = x2 + np.maximum(0.0, x2 - model.T / 2.0)
        feats[:, 1] = x2
    return feats


def rewards_from_features(feats: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Flow rewards (n, 3) for all actions from the (n, 2) regressor array."""
    theta = np.asarray(theta, dtype=float)
    n = feats.shape[0]
    out = np.empty((n, 3), dtype=float)
    out[:, 0] = theta[0] * feats[:, 0]
    out[:, 1] = theta[1] * feats[:, 0] + theta[2] * feats[:, 1]
    out[:, 2] = theta[3]
    return out
