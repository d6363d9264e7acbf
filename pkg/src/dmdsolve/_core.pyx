# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: sparse tensor B-spline evaluation, batch value
evaluation, and the stochastic-approximation pass over a transition stream.

Mirrors ``dmdsolve._kernels_py``; the two implementations must stay in sync
(same span convention, same left-to-right tensor products, same update
order).  Stack buffers bound the supported basis size: degree <= 7 and at
most 8 spline dimensions with (degree+1)**n_dims <= 4096 active entries;
``dmdsolve.backend`` routes larger bases to the Python fallback.
"""

import numpy as np

from libc.math cimport exp, fabs, isfinite, log

BACKEND_NAME = "cython"

cdef double EULER_GAMMA = 0.5772156649015329


cdef inline int _find_span(const double* ext, int n_ext, int degree,
                           int n_basis, double x) noexcept nogil:
    cdef int lo = 0
    cdef int hi = n_ext
    cdef int mid
    while lo < hi:
        mid = (lo + hi) // 2
        if ext[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    cdef int span = lo - 1
    if span < degree:
        span = degree
    if span > n_basis - 1:
        span = n_basis - 1
    return span


cdef inline long _basis_funs(const double* ext, int degree, int span, double x,
                             double* vals) noexcept nogil:
    cdef double left[8]
    cdef double right[8]
    cdef double saved, tmp
    cdef int j, r
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
    return span - degree


cdef int _active_set(const double[:, ::1] ext, int degree, long n_per_dim,
                     long n_lag, const long* coords, long lag,
                     long* out_idx, double* out_vals) noexcept nogil:
    cdef int n_dims = <int>ext.shape[0]
    cdef int n_ext = <int>ext.shape[1]
    cdef double bvals[8][8]
    cdef long firsts[8]
    cdef int d, span, c, rem, i_d, divisor
    cdef int i0, i1, i2, i3, k
    cdef int order = degree + 1
    cdef int n_active = 1
    cdef long idx, j0, j1, j2
    cdef double val, x, v0, v1, v2
    for d in range(n_dims):
        x = <double>coords[d]
        span = _find_span(&ext[d, 0], n_ext, degree, <int>n_per_dim, x)
        firsts[d] = _basis_funs(&ext[d, 0], degree, span, x, &bvals[d][0])
        n_active *= order
    # unrolled tensor products for the common dimension counts; products
    # accumulate left to right to match the Python fallback exactly
    if n_dims == 1:
        for i0 in range(order):
            out_idx[i0] = (firsts[0] + i0) * n_lag + lag
            out_vals[i0] = bvals[0][i0]
        return n_active
    if n_dims == 2:
        k = 0
        for i0 in range(order):
            j0 = (firsts[0] + i0) * n_per_dim
            v0 = bvals[0][i0]
            for i1 in range(order):
                out_idx[k] = (j0 + firsts[1] + i1) * n_lag + lag
                out_vals[k] = v0 * bvals[1][i1]
                k += 1
        return n_active
    if n_dims == 3:
        k = 0
        for i0 in range(order):
            j0 = (firsts[0] + i0) * n_per_dim
            v0 = bvals[0][i0]
            for i1 in range(order):
                j1 = (j0 + firsts[1] + i1) * n_per_dim
                v1 = v0 * bvals[1][i1]
                for i2 in range(order):
                    out_idx[k] = (j1 + firsts[2] + i2) * n_lag + lag
                    out_vals[k] = v1 * bvals[2][i2]
                    k += 1
        return n_active
    if n_dims == 4:
        k = 0
        for i0 in range(order):
            j0 = (firsts[0] + i0) * n_per_dim
            v0 = bvals[0][i0]
            for i1 in range(order):
                j1 = (j0 + firsts[1] + i1) * n_per_dim
                v1 = v0 * bvals[1][i1]
                for i2 in range(order):
                    j2 = (j1 + firsts[2] + i2) * n_per_dim
                    v2 = v1 * bvals[2][i2]
                    for i3 in range(order):
                        out_idx[k] = (j2 + firsts[3] + i3) * n_lag + lag
                        out_vals[k] = v2 * bvals[3][i3]
                        k += 1
        return n_active
    for c in range(n_active):
        rem = c
        idx = 0
        val = 1.0
        divisor = n_active
        for d in range(n_dims):
            divisor //= order
            i_d = rem // divisor
            rem -= i_d * divisor
            idx = idx * n_per_dim + (firsts[d] + i_d)
            val *= bvals[d][i_d]
        out_idx[c] = idx * n_lag + lag
        out_vals[c] = val
    return n_active


def values_on_coords(double[::1] w, long[:, ::1] coords, long[::1] lag,
                     double[:, ::1] ext_knots, int degree, long n_per_dim,
                     long n_lag):
    """Batch spline-value evaluation: out[i] = phi(coords[i], lag[i]) . w."""
    cdef Py_ssize_t m = coords.shape[0]
    out = np.empty(m)
    cdef double[::1] out_v = out
    cdef long idx_buf[4096]
    cdef double val_buf[4096]
    cdef Py_ssize_t i
    cdef int na, j
    cdef double acc
    with nogil:
        for i in range(m):
            na = _active_set(ext_knots, degree, n_per_dim, n_lag,
                             &coords[i, 0], lag[i], idx_buf, val_buf)
            acc = 0.0
            for j in range(na):
                acc += w[idx_buf[j]] * val_buf[j]
            out_v[i] = acc
    return out


def slstd_run_pass(double[::1] w, long[:, ::1] state_coords,
                   long[::1] state_lag, unsigned char[::1] term,
                   long[:, :, ::1] succ_coords, long[:, ::1] succ_lag,
                   double[:, ::1] feats, double[::1] theta, double beta,
                   double c1, double c2, long ell_start,
                   double[:, ::1] ext_knots, int degree, long n_per_dim,
                   long n_lag, double norm_cap):
    """One full pass of stochastic-approximation updates over the data stream.

    Updates w in place with step size c1 / (ell + c2); the step counter ell
    persists across calls.  Returns (ell_end, fail_offset); fail_offset is -1
    on success or the record offset where the iterate left the finite or
    norm-cap region.
    """
    cdef Py_ssize_t n = state_coords.shape[0]
    cdef long ell = ell_start
    cdef long fail = -1
    cdef long sidx[4096]
    cdef double svals[4096]
    cdef long nidx[4096]
    cdef double nvals[4096]
    cdef double v[3]
    cdef Py_ssize_t i
    cdef int na, nb, j, a
    cdef double vhat, acc, x1, x2, m, lse, resid, eta, scale
    with nogil:
        for i in range(n):
            na = _active_set(ext_knots, degree, n_per_dim, n_lag,
                             &state_coords[i, 0], state_lag[i], sidx, svals)
            vhat = 0.0
            for j in range(na):
                vhat += w[sidx[j]] * svals[j]
            if not isfinite(vhat) or fabs(vhat) > norm_cap:
                fail = i
                break
            if term[i]:
                resid = -vhat
            else:
                x1 = feats[i, 0]
                x2 = feats[i, 1]
                v[0] = theta[0] * x1
                v[1] = theta[1] * x1 + theta[2] * x2
                v[2] = theta[3]
                for a in range(3):
                    nb = _active_set(ext_knots, degree, n_per_dim, n_lag,
                                     &succ_coords[i, a, 0], succ_lag[i, a],
                                     nidx, nvals)
                    acc = 0.0
                    for j in range(nb):
                        acc += w[nidx[j]] * nvals[j]
                    v[a] += beta * acc
                m = v[0]
                if v[1] > m:
                    m = v[1]
                if v[2] > m:
                    m = v[2]
                lse = m + log(exp(v[0] - m) + exp(v[1] - m) + exp(v[2] - m))
                resid = EULER_GAMMA + lse - vhat
            eta = c1 / (<double>ell + c2)
            scale = eta * resid
            for j in range(na):
                w[sidx[j]] += scale * svals[j]
            ell += 1
    return ell, fail
