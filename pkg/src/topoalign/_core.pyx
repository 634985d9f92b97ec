# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop for the topological alignment jump process.

Mirrors ``_fallback`` operation for operation (built without FP contraction)
so both backends give bit-identical trajectories for the same random draws.
Partner lookup is a quickselect on (distance, index) pairs, O(N) per event.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs

cnp.import_array()

BACKEND = "cython"


cdef inline double _wrap(double y, double L) noexcept nogil:
    y = y - L * floor(y / L)
    if y < 0.0:
        y = y + L
    if y >= L:
        y = y - L
    return y


cdef inline bint _less(double a, Py_ssize_t ia, double b, Py_ssize_t ib) noexcept nogil:
    return a < b or (a == b and ia < ib)


cdef Py_ssize_t _select(double* key, Py_ssize_t* idx, Py_ssize_t n, Py_ssize_t k) noexcept nogil:
    """Rearrange so position k holds the k-th smallest (key, idx) pair."""
    cdef Py_ssize_t lo = 0, hi = n - 1, mid, store, p
    cdef double pk, tk
    cdef Py_ssize_t pi, ti
    while hi > lo:
        mid = lo + (hi - lo) // 2
        # median of three into hi
        if _less(key[mid], idx[mid], key[lo], idx[lo]):
            key[mid], key[lo] = key[lo], key[mid]
            idx[mid], idx[lo] = idx[lo], idx[mid]
        if _less(key[hi], idx[hi], key[lo], idx[lo]):
            key[hi], key[lo] = key[lo], key[hi]
            idx[hi], idx[lo] = idx[lo], idx[hi]
        if _less(key[mid], idx[mid], key[hi], idx[hi]):
            key[mid], key[hi] = key[hi], key[mid]
            idx[mid], idx[hi] = idx[hi], idx[mid]
        pk = key[hi]
        pi = idx[hi]
        store = lo
        for p in range(lo, hi):
            if _less(key[p], idx[p], pk, pi):
                tk = key[p]; key[p] = key[store]; key[store] = tk
                ti = idx[p]; idx[p] = idx[store]; idx[store] = ti
                store += 1
        key[hi] = key[store]; key[store] = pk
        idx[hi] = idx[store]; idx[store] = pi
        if store == k:
            return idx[k]
        elif store < k:
            lo = store + 1
        else:
            hi = store - 1
    return idx[k]


cdef Py_ssize_t _pick_rank(const double[::1] cum_w, double u) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = cum_w.shape[0], mid
    cdef double target = u * cum_w[cum_w.shape[0] - 1]
    # first index with cum_w[idx] > target (searchsorted side="right")
    while lo < hi:
        mid = (lo + hi) // 2
        if cum_w[mid] <= target:
            lo = mid + 1
        else:
            hi = mid
    if lo > cum_w.shape[0] - 1:
        lo = cum_w.shape[0] - 1
    return lo


cdef void _flight(double[:, ::1] src, double[:, ::1] v, double dt, double L,
                  bint periodic, double[:, ::1] dst) noexcept nogil:
    cdef Py_ssize_t p, c
    cdef double y
    for p in range(src.shape[0]):
        for c in range(src.shape[1]):
            y = src[p, c] + v[p, c] * dt
            if periodic:
                y = _wrap(y, L)
            dst[p, c] = y


def simulate_segment(double[:, ::1] x, double[:, ::1] v, double L, bint periodic,
                     double t0, const double[::1] event_times, const double[::1] chooser_u,
                     const double[::1] partner_u, const double[::1] cum_w,
                     const double[::1] snap_times, double t_end):
    cdef Py_ssize_t N = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t n_ev = event_times.shape[0], n_snap = snap_times.shape[0]
    cdef Py_ssize_t e, k = 0, i, j, p, c, r
    cdef double t_cur = t0, te, dx, acc

    choosers_arr = np.empty(n_ev, dtype=np.int64)
    partners_arr = np.empty(n_ev, dtype=np.int64)
    snap_x_arr = np.empty((n_snap, N, d), dtype=np.float64)
    snap_v_arr = np.empty((n_snap, N, d), dtype=np.float64)
    key_arr = np.empty(N, dtype=np.float64)
    idx_arr = np.empty(N, dtype=np.intp)
    cdef cnp.int64_t[::1] choosers = choosers_arr
    cdef cnp.int64_t[::1] partners = partners_arr
    cdef double[:, :, ::1] snap_x = snap_x_arr
    cdef double[:, :, ::1] snap_v = snap_v_arr
    cdef double[::1] key = key_arr
    cdef Py_ssize_t[::1] idx = idx_arr

    with nogil:
        for e in range(n_ev):
            te = event_times[e]
            while k < n_snap and snap_times[k] < te:
                _flight(x, v, snap_times[k] - t_cur, L, periodic, snap_x[k])
                snap_v[k, :, :] = v
                k += 1
            _flight(x, v, te - t_cur, L, periodic, x)
            t_cur = te

            i = <Py_ssize_t>(chooser_u[e] * N)
            if i > N - 1:
                i = N - 1
            r = _pick_rank(cum_w, partner_u[e])
            for p in range(N):
                acc = 0.0
                for c in range(d):
                    dx = fabs(x[p, c] - x[i, c])
                    if periodic and L - dx < dx:
                        dx = L - dx
                    acc = acc + dx * dx
                key[p] = acc
                idx[p] = p
            key[i] = -1.0
            j = _select(&key[0], &idx[0], N, r + 1)
            for c in range(d):
                v[i, c] = v[j, c]
            choosers[e] = i
            partners[e] = j
        while k < n_snap:
            _flight(x, v, snap_times[k] - t_cur, L, periodic, snap_x[k])
            snap_v[k, :, :] = v
            k += 1
        _flight(x, v, t_end - t_cur, L, periodic, x)

    return choosers_arr, partners_arr, snap_x_arr, snap_v_arr
