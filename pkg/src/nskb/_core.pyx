# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled greedy max-variance selection kernel.

Same contract as the NumPy fallback in ``_core_py.py``.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "cython"


def greedy_max_variance(K, double lam, int n_picks):
    """Greedy posterior-variance maximization over a fixed candidate set.

    See ``nskb._core_py.greedy_max_variance`` for the full contract.
    """
    cdef double[:, ::1] Kv = np.ascontiguousarray(K, dtype=np.float64)
    cdef int n = Kv.shape[0]
    cdef double[::1] var = np.ascontiguousarray(np.diag(K), dtype=np.float64).copy()
    cdef double[:, ::1] W = np.empty((n_picks, n))
    cdef cnp.int64_t[::1] picks = np.empty(n_picks, dtype=np.int64)
    cdef double[::1] pick_vars = np.empty(n_picks)

    cdef int m, i, r, s
    cdef double best, d, acc, w_i, c

    for m in range(n_picks):
        s = 0
        best = var[0]
        for i in range(1, n):
            if var[i] > best:
                best = var[i]
                s = i
        picks[m] = s
        pick_vars[m] = best
        d = sqrt(lam + best)
        # accumulate the new Cholesky row K[s, :] - sum_r W[r, s] * W[r, :]
        # with contiguous row sweeps (axpy-shaped, vectorizable)
        for i in range(n):
            W[m, i] = Kv[s, i]
        for r in range(m):
            c = W[r, s]
            for i in range(n):
                W[m, i] -= c * W[r, i]
        for i in range(n):
            w_i = W[m, i] / d
            W[m, i] = w_i
            acc = var[i] - w_i * w_i
            var[i] = acc if acc > 0.0 else 0.0
    return np.asarray(picks), np.asarray(pick_vars)
