# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_pykernels``.

Outputs must match the numpy versions exactly for identical inputs.
"""

import numpy as np
cimport numpy as cnp
from libcpp.algorithm cimport nth_element
from libcpp.pair cimport pair
from libcpp.vector cimport vector

cnp.import_array()


def encode_rows(const double[:, ::1] probs, const double[:, ::1] u_select,
                const double[:, ::1] u_bern, Py_ssize_t m):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Py_ssize_t d = probs.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double p
    cdef long bad = 0
    cdef vector[pair[double, Py_ssize_t]] keys
    keys.resize(d)

    out_arr = np.zeros((n, d), dtype=np.int8)
    cdef signed char[:, ::1] out = out_arr

    with nogil:
        for i in range(n):
            for j in range(d):
                keys[j].first = u_select[i, j]
                keys[j].second = j
            if m < d:
                nth_element(keys.begin(), keys.begin() + m, keys.end())
            for k in range(m):
                j = keys[k].second
                p = probs[i, j]
                if p < 0.0 or p > 1.0:
                    bad += 1
                    p = 0.0 if p < 0.0 else 1.0
                out[i, j] = 1 if u_bern[i, j] < p else -1
    return out_arr, int(bad)


cdef inline void _accumulate_closed(const long long[::1] indptr,
                                    const int[::1] indices,
                                    const double[:, ::1] x,
                                    Py_ssize_t v, double* acc) noexcept nogil:
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t c, jj, u
    cdef bint self_done = False
    for c in range(d):
        acc[c] = 0.0
    for jj in range(indptr[v], indptr[v + 1]):
        u = indices[jj]
        if not self_done and u > v:
            for c in range(d):
                acc[c] += x[v, c]
            self_done = True
        for c in range(d):
            acc[c] += x[u, c]
    if not self_done:
        for c in range(d):
            acc[c] += x[v, c]


def mean_aggregate(const long long[::1] indptr, const int[::1] indices,
                   const double[:, ::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t v, c
    cdef double size
    y_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    with nogil:
        for v in range(n):
            _accumulate_closed(indptr, indices, x, v, &y[v, 0] if d > 0 else NULL)
            size = <double>(indptr[v + 1] - indptr[v] + 1)
            for c in range(d):
                y[v, c] = y[v, c] / size
    return y_arr


def closed_neighborhood_mean(const long long[::1] indptr, const int[::1] indices,
                             const double[:, ::1] x, const long long[::1] targets):
    cdef Py_ssize_t t = targets.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t r, c, v
    cdef double size
    y_arr = np.empty((t, d), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    with nogil:
        for r in range(t):
            v = targets[r]
            _accumulate_closed(indptr, indices, x, v, &y[r, 0] if d > 0 else NULL)
            size = <double>(indptr[v + 1] - indptr[v] + 1)
            for c in range(d):
                y[r, c] = y[r, c] / size
    return y_arr
