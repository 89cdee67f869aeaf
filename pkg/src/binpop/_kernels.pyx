# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: beta-binomial log-likelihood over contiguous n ranges.

Mirrors binpop._kernels_py; the two must stay numerically equivalent (they
are compared in tests to 5e-13 relative).
"""

from libc.math cimport lgamma, INFINITY

import numpy as np


def gamma_term_range(long long k, long long s, double a, double b,
                     long long n_start, Py_ssize_t length):
    """lgamma(k*n - s + b) - lgamma(k*n + a + b) for n = n_start .. n_start+length-1.

    Entries with k*n - s + b <= 0 (only possible below the sample maximum)
    are set to -inf so they can never contaminate a sum.
    """
    out = np.empty(length, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef long long n
    cdef double left
    for i in range(length):
        n = n_start + i
        left = <double>(k * n - s) + b
        if left <= 0.0:
            o[i] = -INFINITY
        else:
            o[i] = lgamma(left) - lgamma(<double>(k * n) + a + b)
    return out


def log_comb_range(long long x, long long n_start, Py_ssize_t length):
    """log C(n, x) for n = n_start .. n_start+length-1; -inf where n < x."""
    out = np.empty(length, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef long long n
    cdef double lgx = lgamma(<double>x + 1.0)
    for i in range(length):
        n = n_start + i
        if n < x:
            o[i] = -INFINITY
        else:
            o[i] = lgamma(<double>n + 1.0) - lgx - lgamma(<double>(n - x) + 1.0)
    return out


def logbb_range(long long[::1] xs, long long[::1] cnts,
                long long k, long long s, double a, double b,
                long long n_start, Py_ssize_t length):
    """Full log beta-binomial likelihood over a contiguous n range.

    out[i] = sum_x cnts[x] * log C(n, x)
             + lgamma(k n - s + b) + lgamma(s + a) - lgamma(k n + a + b)

    xs must be sorted ascending with positive multiplicities cnts.
    The accumulation order (gamma terms first, then x ascending) matches the
    composed kernel path, so both produce bit-identical results.
    """
    out = np.empty(length, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, nx = xs.shape[0]
    cdef long long n, x
    cdef double acc, left
    cdef double lgsa = lgamma(<double>s + a)
    # lgamma(x+1) per distinct count, hoisted out of the n loop
    lgx_arr = np.empty(nx, dtype=np.float64)
    cdef double[::1] lgx = lgx_arr
    for j in range(nx):
        lgx[j] = lgamma(<double>xs[j] + 1.0)
    for i in range(length):
        n = n_start + i
        left = <double>(k * n - s) + b
        if left <= 0.0:
            o[i] = -INFINITY
            continue
        acc = (lgamma(left) - lgamma(<double>(k * n) + a + b)) + lgsa
        for j in range(nx):
            x = xs[j]
            if n < x:
                acc = -INFINITY
                break
            acc = acc + (<double>cnts[j]) * (lgamma(<double>n + 1.0) - lgx[j]
                                             - lgamma(<double>(n - x) + 1.0))
        o[i] = acc
    return out
