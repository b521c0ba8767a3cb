"""Pure-numpy versions of the compiled kernels (same arithmetic, same order)."""

import numpy as np

BACKEND = "python"


def tridiag_lines(lower, diag, upper, rhs, out, nthreads=1):
    n = diag.shape[0]
    cp = np.empty(n)
    den = np.empty(n)
    den[0] = diag[0]
    cp[0] = upper[0] / den[0]
    for j in range(1, n):
        den[j] = diag[j] - lower[j] * cp[j - 1]
        cp[j] = upper[j] / den[j]
    out[0] = rhs[0] / den[0]
    for j in range(1, n):
        out[j] = (rhs[j] - lower[j] * out[j - 1]) / den[j]
    for j in range(n - 2, -1, -1):
        out[j] = out[j] - cp[j] * out[j + 1]
    return out


def circulant_rings(u, g, kmax, out, nthreads=1):
    n = u.shape[1]
    half = n // 2
    out[...] = g[:, 0:1] * u
    for k in range(1, int(kmax.max(initial=0)) + 1):
        rows = np.nonzero(kmax >= k)[0]
        gk = g[rows, k:k + 1]
        if k == half:
            out[rows] = out[rows] + gk * np.roll(u[rows], -k, axis=1)
        else:
            out[rows] = out[rows] + gk * (np.roll(u[rows], -k, axis=1) + np.roll(u[rows], k, axis=1))
    return out


def sturm_counts(diag, off2, shifts, pivmin):
    x = np.asarray(shifts, dtype=float)
    q = diag[0] - x
    q = np.where((q < pivmin) & (q > -pivmin), -pivmin, q)
    c = (q < 0).astype(np.int64)
    for i in range(1, diag.shape[0]):
        q = diag[i] - x - off2[i - 1] / q
        q = np.where((q < pivmin) & (q > -pivmin), -pivmin, q)
        c += q < 0
    return c
