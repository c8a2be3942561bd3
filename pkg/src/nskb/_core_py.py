"""Pure-NumPy implementation of the greedy max-variance selection kernel.

This is the import-time fallback for the compiled extension in ``_core.pyx``.
Both backends implement the same contract; see ``_backend.py``.
"""
import numpy as np

BACKEND = "python"


def greedy_max_variance(K, lam, n_picks):
    """Greedy posterior-variance maximization over a fixed candidate set.

    Repeatedly picks the candidate of maximal posterior variance (ties broken
    by lowest index) given the picks so far, using incremental Cholesky rows
    instead of refitting.

    Parameters
    ----------
    K : (n, n) ndarray
        Gram matrix of the candidate set.
    lam : float
        Regularization (noise variance) parameter, > 0.
    n_picks : int
        Number of points to select; may exceed n (duplicates allowed).

    Returns
    -------
    picks : (n_picks,) int64 ndarray
        Selected candidate indices, in order.
    pick_vars : (n_picks,) float64 ndarray
        Posterior variance of each pick at selection time.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    n = K.shape[0]
    var = np.ascontiguousarray(np.diag(K)).copy()
    W = np.empty((n_picks, n))  # rows of L^{-1} K(S, X)
    picks = np.empty(n_picks, dtype=np.int64)
    pick_vars = np.empty(n_picks)
    for m in range(n_picks):
        s = int(np.argmax(var))
        picks[m] = s
        pick_vars[m] = var[s]
        w = (K[s] - W[:m, s] @ W[:m]) / np.sqrt(lam + var[s])
        var -= w * w
        np.maximum(var, 0.0, out=var)
        W[m] = w
    return picks, pick_vars
