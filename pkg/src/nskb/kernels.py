"""SE and Matern kernel families and Gram-matrix construction.

Both families are unit-variance (k(x, x) = 1) and isotropic: they depend on
the inputs only through the Euclidean distance ``r = ||x - x'||_2``.  Matern
kernels are supported for half-integer smoothness only, via the closed-form
polynomial-times-exponential expressions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SE = "se"
MATERN = "matern"

_HALF_INTEGER_NU = (0.5, 1.5, 2.5, 3.5)

# Distances below this are treated as exactly zero so that k(x, x) == 1.0
# holds bit-exactly despite floating-point noise in the norm.
_DIST_EPS = 1e-12


class ConfigurationError(ValueError):
    """Invalid kernel / algorithm / experiment configuration."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    Parameters
    ----------
    family : str
        "se" or "matern".
    lengthscale : float
        Lengthscale, > 0.
    nu : float or None
        Smoothness (Matern only); one of {1/2, 3/2, 5/2, 7/2}.
    """

    family: str
    lengthscale: float
    nu: float | None = None

    def __post_init__(self):
        if self.family not in (SE, MATERN):
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        if not self.lengthscale > 0:
            raise ConfigurationError(f"lengthscale must be > 0, got {self.lengthscale}")
        if self.family == MATERN:
            if self.nu not in _HALF_INTEGER_NU:
                raise ConfigurationError(
                    f"Matern nu must be a half-integer in {_HALF_INTEGER_NU}, got {self.nu}"
                )
        elif self.nu is not None:
            raise ConfigurationError("nu is only meaningful for the Matern family")


def _distances(x, y):
    """Pairwise Euclidean distances, clamped to exact zero below 1e-12."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    d2 = np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1)
    r = np.sqrt(np.maximum(d2, 0.0))
    r[r < _DIST_EPS] = 0.0
    return r


def kernel_values(spec: KernelSpec, r):
    """Evaluate the kernel as a function of distance ``r`` (array ok)."""
    r = np.asarray(r, dtype=np.float64)
    ell = spec.lengthscale
    if spec.family == SE:
        return np.exp(-(r * r) / (2.0 * ell * ell))
    u = np.sqrt(2.0 * spec.nu) * r / ell
    e = np.exp(-u)
    if spec.nu == 0.5:
        return e
    if spec.nu == 1.5:
        return (1.0 + u) * e
    if spec.nu == 2.5:
        return (1.0 + u + u * u / 3.0) * e
    # nu == 3.5
    return (1.0 + u + 2.0 * u * u / 5.0 + u ** 3 / 15.0) * e


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """k(x, y) for single points.

    Symmetric by construction (the distance is computed once), bounded in
    (0, 1], and equal to 1 exactly when x == y.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("kernel inputs must be finite")
    r = float(np.linalg.norm(x - y))
    if r < _DIST_EPS:
        r = 0.0
    return float(kernel_values(spec, r))


def gram_matrix(spec: KernelSpec, points) -> np.ndarray:
    """Dense Gram matrix K[i, j] = k(points[i], points[j]).

    Duplicate points are allowed (the selection loop can re-pick an arm
    within a batch).  An empty point list yields a 0x0 matrix.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        return np.zeros((0, 0))
    points = np.atleast_2d(points)
    r = _distances(points, points)
    # enforce exact symmetry and a unit diagonal
    r = np.triu(r, k=1)
    r = r + r.T
    K = kernel_values(spec, r)
    np.fill_diagonal(K, 1.0)
    return K


def cross_gram(spec: KernelSpec, x, y) -> np.ndarray:
    """Rectangular kernel matrix k(x_i, y_j)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        return np.zeros((np.atleast_2d(x).shape[0] if x.size else 0,
                         np.atleast_2d(y).shape[0] if y.size else 0))
    return kernel_values(spec, _distances(x, y))
