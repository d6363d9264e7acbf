"""Value-function views over the packed state index.

Solvers return one of two concrete forms: a dense table over the whole grid
(exact and period-by-period methods) or spline coefficients (the TD solver).
Downstream consumers (likelihood, Bellman-error reports, simulation) only
need ``values_at`` on packed indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import basis_kernel_args, kernels_for
from .basis import SplineBasis
from .model import CareerModel, unpack_coords


@dataclass(frozen=True)
class TableValues:
    """Dense per-state values, indexed by packed state index."""

    table: np.ndarray

    def values_at(self, packed: np.ndarray) -> np.ndarray:
        return self.table[np.asarray(packed, dtype=np.int64)]

    def dense(self, model: CareerModel) -> np.ndarray:
        if len(self.table) != model.n_states:
            raise ValueError("table length does not match the model grid")
        return self.table


@dataclass(frozen=True)
class SplineValues:
    """Values represented as phi(s)' w for a spline basis and weight vector."""

    model: CareerModel
    basis: SplineBasis
    w: np.ndarray

    def values_at(self, packed: np.ndarray) -> np.ndarray:
        coords = unpack_coords(self.model, np.atleast_1d(packed))
        return self.values_on(coords)

    def values_on(self, coords: np.ndarray) -> np.ndarray:
        """Values at an (n, p) array of full state coordinates."""
        kern = kernels_for(self.basis)
        cont = np.ascontiguousarray(coords[:, :-1], dtype=np.int64)
        lag = np.ascontiguousarray(coords[:, -1], dtype=np.int64)
        return kern.values_on_coords(
            np.ascontiguousarray(self.w, dtype=np.float64),
            cont,
            lag,
            *basis_kernel_args(self.basis),
        )

    def dense(self, model: CareerModel) -> np.ndarray:
        packed = np.arange(model.n_states, dtype=np.int64)
        return self.values_at(packed)
