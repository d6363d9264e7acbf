"""Pure-Python fallback for the hot kernels.

The compiled extension ``dmdsolve._core`` implements the same two entry
points with identical semantics; this module keeps the package fully
functional when the extension is unavailable.  Both backends follow the same
arithmetic (per-dimension Cox-de Boor evaluation, left-to-right tensor
products, sequential weight updates) so their results agree to rounding.
"""

from __future__ import annotations

import math

import numpy as np

from .basis import basis_funs_1d
from .logit import EULER_GAMMA

BACKEND_NAME = "python"


def _active(ext_knots, degree, n_per_dim, n_lag, coords, lag):
    idx = None
    vals = None
    for d in range(ext_knots.shape[0]):
        first, v = basis_funs_1d(ext_knots[d], degree, float(coords[d]))
        cols = first + np.arange(degree + 1)
        if idx is None:
            idx, vals = cols, v
        else:
            idx = (idx[:, None] * n_per_dim + cols[None, :]).ravel()
            vals = (vals[:, None] * v[None, :]).ravel()
    return idx * n_lag + int(lag), vals


def values_on_coords(w, coords, lag, ext_knots, degree, n_per_dim, n_lag):
    """Batch spline-value evaluation: out[i] = phi(coords[i], lag[i]) . w."""
    out = np.empty(coords.shape[0])
    for i in range(coords.shape[0]):
        idx, vals = _active(ext_knots, degree, n_per_dim, n_lag, coords[i], lag[i])
        out[i] = float(w[idx] @ vals)
    return out


def slstd_run_pass(
    w,
    state_coords,
    state_lag,
    term,
    succ_coords,
    succ_lag,
    feats,
    theta,
    beta,
    c1,
    c2,
    ell_start,
    ext_knots,
    degree,
    n_per_dim,
    n_lag,
    norm_cap,
):
    """One full pass of stochastic-approximation updates over the data stream.

    Updates w in place, one transition at a time, with step size
    ``c1 / (ell + c2)`` and a global step counter that persists across calls.
    Returns ``(ell_end, fail_offset)`` where fail_offset is -1 on success or
    the offending record's offset when the iterate left the finite/norm-cap
    region.
    """
    n = state_coords.shape[0]
    ell = int(ell_start)
    v = np.empty(3)
    for i in range(n):
        sidx, svals = _active(
            ext_knots, degree, n_per_dim, n_lag, state_coords[i], state_lag[i]
        )
        vhat = float(w[sidx] @ svals)
        if not math.isfinite(vhat) or abs(vhat) > norm_cap:
            return ell, i
        if term[i]:
            resid = -vhat
        else:
            x1 = feats[i, 0]
            x2 = feats[i, 1]
            v[0] = theta[0] * x1
            v[1] = theta[1] * x1 + theta[2] * x2
            v[2] = theta[3]
            for a in range(3):
                nidx, nvals = _active(
                    ext_knots,
                    degree,
                    n_per_dim,
                    n_lag,
                    succ_coords[i, a],
                    succ_lag[i, a],
                )
                v[a] += beta * float(w[nidx] @ nvals)
            m = float(v.max())
            lse = m + math.log(math.exp(v[0] - m) + math.exp(v[1] - m) + math.exp(v[2] - m))
            resid = EULER_GAMMA + lse - vhat
        eta = c1 / (ell + c2)
        w[sidx] += (eta * resid) * svals
        ell += 1
    return ell, -1
