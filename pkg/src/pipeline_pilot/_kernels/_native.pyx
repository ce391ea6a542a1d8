# cython: boundscheck=False, wraparound=False, cdivision=True
"""Native (Cython) implementations of the hot kernels.

Must stay behaviour-identical to pipeline_pilot._kernels.fallback; the
backend equivalence tests enforce it.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t, uint64_t

cnp.import_array()

cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001B3ULL

BACKEND_NAME = "native"


def accumulate_features(data, starts, ends, rows, Py_ssize_t n_rows, Py_ssize_t dim):
    """Hash byte-span features into signed count buckets (see fallback)."""
    cdef const uint8_t[::1] d = np.ascontiguousarray(data, dtype=np.uint8)
    cdef const int64_t[::1] s = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const int64_t[::1] e = np.ascontiguousarray(ends, dtype=np.int64)
    cdef const int64_t[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    out_arr = np.zeros((n_rows, dim), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, n_feat = s.shape[0]
    cdef uint64_t h
    cdef int64_t bucket
    for i in range(n_feat):
        h = FNV_OFFSET
        for j in range(s[i], e[i]):
            h = (h ^ <uint64_t> d[j]) * FNV_PRIME
        bucket = <int64_t> (h % <uint64_t> dim)
        if h >> 63:
            out[r[i], bucket] -= 1.0
        else:
            out[r[i], bucket] += 1.0
    return out_arr


def nearest_index(matrix, query):
    """Exact linear scan: index and squared distance of the nearest row."""
    cdef const double[:, ::1] m = np.ascontiguousarray(matrix, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(query, dtype=np.float64)
    cdef Py_ssize_t n = m.shape[0], p = m.shape[1]
    if n == 0:
        raise ValueError("empty candidate matrix")
    cdef Py_ssize_t i, j, best = 0
    cdef double best_sq = 1e308 * 10.0  # +inf
    cdef double acc, diff
    for i in range(n):
        acc = 0.0
        for j in range(p):
            diff = m[i, j] - q[j]
            acc += diff * diff
        if acc < best_sq:
            best_sq = acc
            best = i
    return best, best_sq
