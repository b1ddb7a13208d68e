# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled jet arithmetic kernel (see _jetcore_py for the fallback)."""

import numpy as np

IMPL_NAME = "cython"


def mul(const double[::1] a, const double[::1] b,
        const long long[::1] ia, const long long[::1] ib, const long long[::1] iout,
        Py_ssize_t size):
    out_arr = np.zeros(size, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    cdef Py_ssize_t m = ia.shape[0]
    for k in range(m):
        out[iout[k]] += a[ia[k]] * b[ib[k]]
    return out_arr
