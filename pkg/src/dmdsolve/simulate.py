"""Synthetic panel generation under a known parameter vector.

Agents all start at the initial state (age 1, empty history, previous choice
home) and choose by argmax of action value plus a Gumbel draw, which is
distributionally identical to sampling from the logit probabilities.  Each
agent owns a spawned generator stream, so simulation is reproducible and
order-independent; draws use the inverse CDF ``-log(-log(U))``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import MemoryCapExceeded, exact_solve
from .model import (
    CareerModel,
    build_career_model,
    pack_coords,
    reward_features_coords,
    rewards_from_features,
    transition_coords,
)
from .values import TableValues


@dataclass
class Dataset:
    """n agent trajectories: T visited states (terminal included) and the
    T-1 actions that produced them."""

    states: np.ndarray   # (n, T) packed state indices
    actions: np.ndarray  # (n, T-1) actions in {1, 2, 3}
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]

    @property
    def n_records(self) -> int:
        """Stream length N = n * T (decision records plus terminal visits)."""
        return self.states.size

    def stream_packed(self) -> np.ndarray:
        """All visited states in solver order (agent-major)."""
        return self.states.reshape(-1)


def _gumbel_draws(seed: int, n: int, steps: int) -> np.ndarray:
    """(n, steps, 3) Gumbel draws from per-agent spawned streams."""
    out = np.empty((n, steps, 3))
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n)):
        u = np.random.default_rng(child).random((steps, 3))
        out[i] = -np.log(-np.log(u))
    return out


def simulate_dataset(
    model: CareerModel,
    theta_true: np.ndarray,
    n: int,
    seed: int,
    values=None,
    memory_cap_bytes: int | None = None,
    fallback=None,
) -> Dataset:
    """Simulate n trajectories under theta_true.

    Choice probabilities come from the exact value table by default, so the
    data-generating process is independent of whatever approximation is under
    test.  When the exact table exceeds ``memory_cap_bytes`` and ``fallback``
    (a callable theta -> value view) is given, that view is used instead and
    the dataset metadata carries a warning flag.
    """
    if n < 1:
        raise ValueError("need at least one agent")
    theta_true = np.asarray(theta_true, dtype=float)
    source = "custom"
    if values is None:
        try:
            values = TableValues(exact_solve(model, theta_true, memory_cap_bytes))
            source = "exact"
        except MemoryCapExceeded:
            if fallback is None:
                raise
            values = fallback(theta_true)
            source = "fallback"

    steps = model.T - 1
    gumbels = _gumbel_draws(seed, n, steps)
    states = np.empty((n, model.T), dtype=np.int64)
    actions = np.empty((n, steps), dtype=np.int64)

    cur = np.tile(np.asarray(model.initial_state().coords, dtype=np.int64), (n, 1))
    for t in range(steps):
        rew = rewards_from_features(reward_features_coords(model, cur), theta_true)
        succ = np.stack(
            [transition_coords(model, cur, a) for a in (1, 2, 3)], axis=1
        )
        succ_packed = pack_coords(model, succ.reshape(-1, model.p)).reshape(n, 3)
        v = rew + model.beta * values.values_at(succ_packed.ravel()).reshape(n, 3)
        choice = np.argmax(v + gumbels[:, t, :], axis=1)
        states[:, t] = pack_coords(model, cur)
        actions[:, t] = choice + 1
        cur = succ[np.arange(n), choice]
    states[:, steps] = pack_coords(model, cur)

    meta = {
        "model": {
            "p": model.p,
            "T": model.T,
            "beta": model.beta,
            "reward_kink": model.reward_kink,
        },
        "theta_true": [float(x) for x in theta_true],
        "n_agents": n,
        "seed": seed,
        "value_source": source,
        "fallback_warning": source == "fallback",
    }
    return Dataset(states=states, actions=actions, seed=seed, meta=meta)


def empirical_state_counts(dataset: Dataset) -> dict[int, int]:
    """Visitation counts over the packed states (terminal visits included)."""
    vals, counts = np.unique(dataset.stream_packed(), return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}


def save_dataset(path: str | Path, model: CareerModel, dataset: Dataset) -> None:
    """Write the panel as CSV (one row per visited state) plus a JSON
    metadata sidecar at ``<path>.meta.json``.

    Columns: agent, t, the p state coordinates, the action (0 on the
    terminal row), and the p next-state coordinates (the row's own state on
    the terminal row).  All integers, so the round trip is exact.
    """
    path = Path(path)
    from .model import unpack_coords

    n, horizon = dataset.states.shape
    coords = unpack_coords(model, dataset.states)  # (n, T, p)
    header = (
        ["agent", "t"]
        + [f"s_{j}" for j in range(model.p)]
        + ["action"]
        + [f"next_{j}" for j in range(model.p)]
    )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            for t in range(horizon):
                row = [i, t + 1] + coords[i, t].tolist()
                if t < horizon - 1:
                    row += [int(dataset.actions[i, t])] + coords[i, t + 1].tolist()
                else:
                    row += [0] + coords[i, t].tolist()
                writer.writerow(row)
    meta_path = path.with_name(path.name + ".meta.json")
    meta_path.write_text(json.dumps(dataset.meta, indent=2, sort_keys=True))


def load_dataset(path: str | Path) -> tuple[CareerModel, Dataset]:
    """Read a dataset written by :func:`save_dataset`."""
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".meta.json").read_text())
    m = meta["model"]
    model = build_career_model(
        m["p"], m["T"], m["beta"], reward_kink=m.get("reward_kink", False)
    )
    raw = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    n = meta["n_agents"]
    horizon = model.T
    if raw.shape[0] != n * horizon:
        raise ValueError(
            f"expected {n * horizon} rows in {path}, found {raw.shape[0]}"
        )
    coords = raw[:, 2 : 2 + model.p]
    states = pack_coords(model, coords).reshape(n, horizon)
    actions = raw[:, 2 + model.p].reshape(n, horizon)[:, :-1]
    return model, Dataset(
        states=states, actions=actions, seed=meta["seed"], meta=meta
    )
