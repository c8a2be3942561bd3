"""GP posterior inference, information gain, and the greedy MIG upper bound.

The posterior mean and variance are the standard kernel ridge / GP forms

    mu(x)     = k(x, X)^T (K + lam*I)^{-1} y
    sigma2(x) = k(x, x) - k(x, X)^T (K + lam*I)^{-1} k(x, X)

computed through a cached Cholesky factorization of K + lam*I.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from nskb import _backend
from nskb.kernels import KernelSpec, cross_gram, gram_matrix, kernel_values

# Eq.-(6)-style variance can go slightly negative in floating point; keep it
# strictly positive so downstream beta * sigma stays real.
VAR_FLOOR = 1e-12


class UsageError(RuntimeError):
    """Operation called on a model missing the required state."""


class NumericalError(RuntimeError):
    """Factorization failure that indicates a kernel bug (lam > 0 should
    make K + lam*I strictly positive definite)."""


@dataclass(frozen=True)
class PosteriorModel:
    """Fitted GP posterior state.

    Immutable after fit; queries are pure functions.  ``factor`` is the lower
    Cholesky factor of K(X, X) + lam*I; ``solved_targets`` caches
    (K + lam*I)^{-1} y when targets were supplied.
    """

    spec: KernelSpec
    lam: float
    design: np.ndarray           # (n, d)
    factor: np.ndarray           # (n, n) lower triangular
    targets: np.ndarray | None   # (n,) or None
    solved_targets: np.ndarray | None

    @property
    def n(self) -> int:
        return self.design.shape[0]


def fit_posterior(spec: KernelSpec, lam: float, X, y=None) -> PosteriorModel:
    """Fit the regularized GP posterior on design X (targets optional).

    With an empty design the model is the prior: mean 0, variance k(x, x).
    Duplicate design points are fine for any lam > 0.
    """
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        X = X.reshape(0, 1 if X.ndim < 2 else X.shape[-1])
    X = np.atleast_2d(X)
    n = X.shape[0]
    if y is not None:
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.shape[0] != n:
            raise ValueError(f"len(y)={y.shape[0]} does not match |X|={n}")
    K = gram_matrix(spec, X)
    try:
        L = cholesky(K + lam * np.eye(n), lower=True) if n else np.zeros((0, 0))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - signals a kernel bug
        raise NumericalError(
            f"Cholesky of K + lam*I failed (n={n}, lam={lam}); "
            f"min diag={K.diagonal().min() if n else 'n/a'}"
        ) from exc
    solved = None
    if y is not None and n:
        solved = solve_triangular(L.T, solve_triangular(L, y, lower=True), lower=False)
    elif y is not None:
        solved = np.zeros(0)
    return PosteriorModel(spec, float(lam), X, L, y, solved)


def extend_posterior(model: PosteriorModel, x_new, y_new=None) -> PosteriorModel:
    """Return a new model with one design point appended.

    Appends a row to the Cholesky factor in O(n^2) instead of refitting.
    """
    x_new = np.asarray(x_new, dtype=np.float64).reshape(1, -1)
    if model.n == 0:
        y = None if model.targets is None else np.array(
            [0.0 if y_new is None else y_new])
        return fit_posterior(model.spec, model.lam, x_new,
                             None if model.targets is None else y)
    c = cross_gram(model.spec, model.design, x_new).ravel()
    l12 = solve_triangular(model.factor, c, lower=True)
    d2 = 1.0 + model.lam - l12 @ l12
    if d2 <= 0:
        raise NumericalError("non-positive pivot in Cholesky append")
    n = model.n
    L = np.zeros((n + 1, n + 1))
    L[:n, :n] = model.factor
    L[n, :n] = l12
    L[n, n] = np.sqrt(d2)
    design = np.vstack([model.design, x_new])
    targets = solved = None
    if model.targets is not None:
        if y_new is None:
            raise UsageError("model has targets; y_new is required")
        targets = np.append(model.targets, y_new)
        solved = solve_triangular(
            L.T, solve_triangular(L, targets, lower=True), lower=False)
    return PosteriorModel(model.spec, model.lam, design, L, targets, solved)


def _kvec(model: PosteriorModel, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return cross_gram(model.spec, model.design, x)  # (n, m)


def posterior_mean(model: PosteriorModel, x):
    """Posterior mean at x (single point or (m, d) batch)."""
    if model.solved_targets is None:
        raise UsageError("model was fitted without targets")
    x_arr = np.asarray(x, dtype=np.float64)
    single = x_arr.ndim <= 1
    if model.n == 0:
        out = np.zeros(1 if single else x_arr.shape[0])
    else:
        out = _kvec(model, x_arr).T @ model.solved_targets
    return float(out[0]) if single else out


def posterior_variance(model: PosteriorModel, x):
    """Posterior variance at x, floored at VAR_FLOOR (targets not needed)."""
    x_arr = np.asarray(x, dtype=np.float64)
    single = x_arr.ndim <= 1
    prior = kernel_values(model.spec, 0.0) * np.ones(1 if single else x_arr.shape[0])
    if model.n == 0:
        var = prior
    else:
        k = _kvec(model, x_arr)
        v = solve_triangular(model.factor, k, lower=True)
        var = prior - np.einsum("ij,ij->j", v, v)
    var = np.maximum(var, VAR_FLOOR)
    return float(var[0]) if single else var


def information_gain(spec: KernelSpec, lam: float, X) -> float:
    """(1/2) ln det(I + lam^{-1} K(X, X)) via Cholesky diagonal entries."""
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return 0.0
    X = np.atleast_2d(X)
    n = X.shape[0]
    K = gram_matrix(spec, X)
    L = cholesky(K + lam * np.eye(n), lower=True)
    # det(K + lam I) = lam^n det(I + K/lam)
    return float(np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(lam))


def greedy_mig_sequence(spec: KernelSpec, lam: float, domain, T: int) -> np.ndarray:
    """Cumulative greedy information-gain bound after 1..T selections.

    Runs T rounds of greedy posterior-variance maximization over the domain;
    round t contributes (1/2) ln(1 + sigma2_{t-1}(x_t) / lam).  The cumulative
    value upper-bounds the MIG of any t-point design in the domain.
    """
    domain = np.atleast_2d(np.asarray(domain, dtype=np.float64))
    if domain.shape[0] == 0:
        raise ValueError("domain must be non-empty")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    K = gram_matrix(spec, domain)
    _, pick_vars = _backend.greedy_max_variance(K, lam, T)
    return np.cumsum(0.5 * np.log1p(pick_vars / lam))


def greedy_mig_bound(spec: KernelSpec, lam: float, domain, T: int) -> float:
    """Greedy upper bound on the maximum information gain after T rounds."""
    return float(greedy_mig_sequence(spec, lam, domain, T)[-1])
