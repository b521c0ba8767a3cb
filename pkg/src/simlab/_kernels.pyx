# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sweeps for the ADI diffusion step and the Sturm count.

Every routine performs the same floating-point operations, in the same order,
as its counterpart in ``_pykernels``; lines and rings are independent so the
result does not depend on the number of OpenMP threads.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange, parallel
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "cython"

# columns per work unit in the radial sweep
cdef enum:
    BLOCK = 32


def tridiag_lines(double[::1] lower, double[::1] diag, double[::1] upper,
                  double[:, ::1] rhs, double[:, ::1] out, int nthreads=1):
    """Solve the same tridiagonal system along axis 0 for every column of ``rhs``."""
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t ncol = rhs.shape[1]
    cdef Py_ssize_t j, col
    cdef double[::1] cp = np.empty(n)
    cdef double[::1] den = np.empty(n)
    den[0] = diag[0]
    cp[0] = upper[0] / den[0]
    for j in range(1, n):
        den[j] = diag[j] - lower[j] * cp[j - 1]
        cp[j] = upper[j] / den[j]
    cdef Py_ssize_t nblk = (ncol + BLOCK - 1) // BLOCK
    cdef Py_ssize_t blk, c0, c1
    for blk in prange(nblk, nogil=True, num_threads=nthreads, schedule="static"):
        c0 = blk * BLOCK
        c1 = c0 + BLOCK
        if c1 > ncol:
            c1 = ncol
        for col in range(c0, c1):
            out[0, col] = rhs[0, col] / den[0]
        for j in range(1, n):
            for col in range(c0, c1):
                out[j, col] = (rhs[j, col] - lower[j] * out[j - 1, col]) / den[j]
        for j in range(n - 2, -1, -1):
            for col in range(c0, c1):
                out[j, col] = out[j, col] - cp[j] * out[j + 1, col]
    return np.asarray(out)


def circulant_rings(double[:, ::1] u, double[:, ::1] g, cnp.int64_t[::1] kmax,
                    double[:, ::1] out, int nthreads=1):
    """Apply a symmetric circulant kernel to each ring.

    ``out[j, m] = g[j, 0] u[j, m] + sum_k g[j, k] (u[j, m + k] + u[j, m - k])``
    with indices modulo ``n`` and ``k = 1 .. kmax[j]``; the offset ``n / 2``
    enters once.
    """
    cdef Py_ssize_t nr = u.shape[0]
    cdef Py_ssize_t n = u.shape[1]
    cdef Py_ssize_t half = n // 2
    cdef Py_ssize_t j, m, k, kk, i
    cdef double gk
    cdef double* ext
    with nogil, parallel(num_threads=nthreads):
        ext = <double*> malloc((3 * n) * sizeof(double))
        for j in prange(nr, schedule="static"):
            for i in range(3 * n):
                ext[i] = u[j, i % n]
            for m in range(n):
                out[j, m] = g[j, 0] * u[j, m]
            kk = kmax[j]
            for k in range(1, kk + 1):
                gk = g[j, k]
                if k == half:
                    for m in range(n):
                        out[j, m] = out[j, m] + gk * ext[n + m + k]
                else:
                    for m in range(n):
                        out[j, m] = out[j, m] + gk * (ext[n + m + k] + ext[n + m - k])
        free(ext)
    return np.asarray(out)


def sturm_counts(double[::1] diag, double[::1] off2, double[::1] shifts, double pivmin):
    """Number of eigenvalues below each shift of a symmetric tridiagonal matrix.

    ``off2[i]`` is the squared off-diagonal coupling rows ``i`` and ``i + 1``.
    """
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t ns = shifts.shape[0]
    cdef Py_ssize_t s, i
    cdef double q, x
    cdef cnp.int64_t c
    counts = np.zeros(ns, dtype=np.int64)
    cdef cnp.int64_t[::1] cv = counts
    for s in range(ns):
        x = shifts[s]
        c = 0
        q = diag[0] - x
        if q < pivmin and q > -pivmin:
            q = -pivmin
        if q < 0:
            c += 1
        for i in range(1, n):
            q = diag[i] - x - off2[i - 1] / q
            if q < pivmin and q > -pivmin:
                q = -pivmin
            if q < 0:
                c += 1
        cv[s] = c
    return counts
