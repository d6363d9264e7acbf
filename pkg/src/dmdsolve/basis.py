"""Tensor-product B-spline basis over the state grid.

Each continuous dimension carries a clamped (open) B-spline basis on
``[0, size - 1]``; the categorical lagged-choice dimension is encoded as
indicator columns crossed with the spline tensor.  The B-splines are the
normalized kind, so the per-dimension values sum to one at every in-range
point and all entries lie in [0, 1].

Degree 0 is special-cased as a histogram basis with cell boundaries at
half-integers, so that ``knots_per_dim == dim_size`` yields one indicator per
grid coordinate (the exact-representation limit used as a test oracle).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import CareerModel, State


def _extended_knots(lo: float, hi: float, n_knots: int, degree: int) -> np.ndarray:
    if hi <= lo:
        raise ValueError(f"degenerate coordinate range [{lo}, {hi}]")
    if degree == 0:
        return np.linspace(lo - 0.5, hi + 0.5, n_knots + 1)
    if n_knots < degree + 1:
        raise ValueError(
            f"need at least degree+1 = {degree + 1} knots, got {n_knots}"
        )
    interior = np.linspace(lo, hi, n_knots)
    return np.concatenate([np.full(degree, lo), interior, np.full(degree, hi)])


def n_basis_1d(n_knots: int, degree: int) -> int:
    """Basis count per dimension: knots + degree - 1 (knots cells at degree 0)."""
    return n_knots if degree == 0 else n_knots + degree - 1


def basis_funs_1d(ext: np.ndarray, degree: int, x: float) -> tuple[int, np.ndarray]:
    """Active B-spline values at x: (first active index, degree+1 values).

    Cox-de Boor triangular scheme; x at the right end of the domain is
    evaluated in the last non-empty span so the clamped end function is 1.
    """
    n = len(ext) - degree - 1
    span = int(np.searchsorted(ext, x, side="right")) - 1
    span = min(max(span, degree), n - 1)
    vals = np.empty(degree + 1)
    left = np.empty(degree + 1)
    right = np.empty(degree + 1)
    vals[0] = 1.0
    for j in range(1, degree + 1):
        left[j] = x - ext[span + 1 - j]
        right[j] = ext[span + j] - x
        saved = 0.0
        for r in range(j):
            tmp = vals[r] / (right[r + 1] + left[j - r])
            vals[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        vals[j] = saved
    return span - degree, vals


@dataclass(frozen=True)
class SplineBasis:
    """Tensor-product spline basis crossed with lagged-choice indicators."""

    dim_sizes: tuple[int, ...]
    knots_per_dim: int
    degree: int
    n_lag: int = 3
    ridge: float = 1e-8
    ext_knots: np.ndarray = field(init=False, repr=False)
    n_per_dim: int = field(init=False)
    k: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.dim_sizes:
            raise ValueError("basis needs at least one continuous dimension")
        rows = [
            _extended_knots(0.0, size - 1.0, self.knots_per_dim, self.degree)
            for size in self.dim_sizes
        ]
        object.__setattr__(self, "ext_knots", np.asarray(rows))
        n1 = n_basis_1d(self.knots_per_dim, self.degree)
        object.__setattr__(self, "n_per_dim", n1)
        object.__setattr__(self, "k", n1 ** len(self.dim_sizes) * self.n_lag)

    @property
    def n_dims(self) -> int:
        return len(self.dim_sizes)

    @property
    def n_active(self) -> int:
        """Upper bound on simultaneously nonzero entries."""
        return (self.degree + 1) ** self.n_dims

    def _check_point(self, xs: Sequence[float], lag: int) -> None:
        if len(xs) != self.n_dims:
            raise ValueError(f"expected {self.n_dims} coordinates, got {len(xs)}")
        for x, size in zip(xs, self.dim_sizes):
            if not (0.0 <= x <= size - 1.0):
                raise ValueError(f"coordinate {x} outside [0, {size - 1}]")
        if not 0 <= lag < self.n_lag:
            raise ValueError(f"lag index {lag} outside [0, {self.n_lag})")

    def active(self, xs: Sequence[float], lag: int) -> tuple[np.ndarray, np.ndarray]:
        """Sparse evaluation: (flat indices, values) of the active entries."""
        self._check_point(xs, lag)
        idx = None
        vals = None
        for d in range(self.n_dims):
            first, v = basis_funs_1d(self.ext_knots[d], self.degree, float(xs[d]))
            cols = first + np.arange(self.degree + 1)
            if idx is None:
                idx, vals = cols, v
            else:
                idx = (idx[:, None] * self.n_per_dim + cols[None, :]).ravel()
                vals = (vals[:, None] * v[None, :]).ravel()
        return idx * self.n_lag + lag, vals

    def evaluate(self, s: State | Sequence[float], lag: int | None = None) -> np.ndarray:
        """Dense feature vector of length k for a state.

        Accepts either a State (lag taken from its last coordinate) or a bare
        coordinate sequence plus an explicit lag index.
        """
        if isinstance(s, State):
            xs = [float(c) for c in s.coords[:-1]]
            lag = int(s.coords[-1])
        else:
            xs = [float(c) for c in s]
            if lag is None:
                raise ValueError("lag index required when passing raw coordinates")
        idx, vals = self.active(xs, lag)
        out = np.zeros(self.k)
        out[idx] = vals
        return out

    def design_matrix(self, coords: np.ndarray, lag: np.ndarray) -> np.ndarray:
        """Dense (n_points, k) evaluation matrix; rows follow the inputs."""
        coords = np.asarray(coords, dtype=float)
        lag = np.asarray(lag, dtype=np.int64)
        out = np.zeros((coords.shape[0], self.k))
        for i in range(coords.shape[0]):
            idx, vals = self.active(coords[i], int(lag[i]))
            out[i, idx] = vals
        return out


def build_basis(
    model: CareerModel, knots_per_dim: int = 5, degree: int = 3, ridge: float = 1e-8
) -> SplineBasis:
    """Basis over all of the model's continuous dimensions plus the lag."""
    return SplineBasis(
        dim_sizes=model.dim_sizes[:-1],
        knots_per_dim=knots_per_dim,
        degree=degree,
        n_lag=model.dim_sizes[-1],
        ridge=ridge,
    )


def _states_to_arrays(
    basis: SplineBasis, sample_states: Iterable[State] | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(sample_states, np.ndarray):
        coords = np.asarray(sample_states[:, :-1], dtype=float)
        lag = np.asarray(sample_states[:, -1], dtype=np.int64)
    else:
        rows = [s.coords for s in sample_states]
        arr = np.asarray(rows, dtype=np.int64)
        coords = arr[:, :-1].astype(float)
        lag = arr[:, -1]
    if coords.shape[1] != basis.n_dims:
        raise ValueError("state dimension does not match the basis")
    return coords, lag


def project(
    basis: SplineBasis,
    sample_states: Iterable[State] | np.ndarray,
    targets: np.ndarray,
) -> np.ndarray:
    """Least-squares weights fitting targets at the sample states.

    Falls back to a ridge-regularized solve (lambda = ridge * trace/k) when
    the design is rank-deficient; with ridge disabled that case raises.
    """
    coords, lag = _states_to_arrays(basis, sample_states)
    y = np.asarray(targets, dtype=float)
    if y.shape[0] != coords.shape[0]:
        raise ValueError("targets length does not match sample states")
    design = basis.design_matrix(coords, lag)
    if design.shape[0] >= basis.k:
        w, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank == basis.k:
            return w
    if basis.ridge <= 0.0:
        raise np.linalg.LinAlgError(
            "rank-deficient projection design and ridge fallback disabled"
        )
    gram = design.T @ design
    lam = basis.ridge * np.trace(gram) / basis.k
    return np.linalg.solve(gram + lam * np.eye(basis.k), design.T @ y)
