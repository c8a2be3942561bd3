"""Non-stationary reward environments over a finite grid.

Rewards are finite RKHS expansions f(x) = sum_i alpha_i k(x, xbar_i) with an
exactly computable RKHS norm.  An environment is an immutable, obliviously
fixed schedule of such functions over [1, T], plus Gaussian observation noise
of scale rho.  Regret and total variation are exact because the domain is a
finite grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from nskb.kernels import ConfigurationError, KernelSpec, cross_gram, gram_matrix


class UsageError(RuntimeError):
    pass


def make_grid(dim: int = 2, per_axis: int = 30) -> np.ndarray:
    """Evenly split [0, 1]^dim into per_axis points along each axis."""
    axes = [np.linspace(0.0, 1.0, per_axis) for _ in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class RewardFunction:
    """Finite RKHS expansion with cached grid values and exact grid max."""

    spec: KernelSpec
    centers: np.ndarray          # (U, d)
    weights: np.ndarray          # (U,)
    grid_values: np.ndarray      # (n_arms,)
    argmax_index: int
    max_value: float
    rkhs_norm: float

    def value(self, x) -> float:
        """Evaluate the expansion at an arbitrary point."""
        k = cross_gram(self.spec, self.centers, np.atleast_2d(x)).ravel()
        return float(self.weights @ k)


def reward_from_expansion(spec: KernelSpec, centers, weights,
                          domain) -> RewardFunction:
    """Build a RewardFunction from explicit centers/weights."""
    return _build_reward(spec, centers, weights,
                         np.atleast_2d(np.asarray(domain, dtype=np.float64)))


def _build_reward(spec: KernelSpec, centers, weights, domain) -> RewardFunction:
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64).ravel()
    vals = cross_gram(spec, centers, domain).T @ weights
    K = gram_matrix(spec, centers)
    norm2 = float(weights @ K @ weights)
    idx = int(np.argmax(vals))
    return RewardFunction(spec, centers, weights, vals, idx,
                          float(vals[idx]), float(np.sqrt(max(norm2, 0.0))))


def sample_rkhs_function(spec: KernelSpec, U: int, domain, rng) -> RewardFunction:
    """Draw U centers uniform on the box enclosing the grid and U weights
    uniform on [-1, 1]."""
    if U < 1:
        raise ValueError(f"U must be >= 1, got {U}")
    domain = np.atleast_2d(np.asarray(domain, dtype=np.float64))
    lo = domain.min(axis=0)
    hi = domain.max(axis=0)
    centers = rng.uniform(lo, hi, size=(U, domain.shape[1]))
    weights = rng.uniform(-1.0, 1.0, size=U)
    return _build_reward(spec, centers, weights, domain)


@dataclass(frozen=True)
class NonStationaryEnv:
    """Time-indexed reward schedule over a finite grid.

    ``schedule`` is a list of (start_step, RewardFunction) breakpoints with
    strictly increasing start steps, the first at step 1.  The schedule is
    fixed at construction; queries never mutate it.
    """

    domain: np.ndarray                 # (n_arms, d)
    schedule: tuple                    # ((start_step, RewardFunction), ...)
    rho: float
    T: int
    _starts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        starts = np.array([s for s, _ in self.schedule], dtype=np.int64)
        if starts.size == 0 or starts[0] != 1 or np.any(np.diff(starts) <= 0):
            raise ConfigurationError(
                "schedule breakpoints must be strictly increasing, first at step 1")
        if self.rho < 0:
            raise ConfigurationError(f"rho must be >= 0, got {self.rho}")
        object.__setattr__(self, "_starts", starts)

    @property
    def n_arms(self) -> int:
        return self.domain.shape[0]

    def function_at(self, t: int) -> RewardFunction:
        if not 1 <= t <= self.T:
            raise UsageError(f"step {t} outside [1, {self.T}]")
        idx = int(np.searchsorted(self._starts, t, side="right")) - 1
        return self.schedule[idx][1]

    def arm_index(self, x) -> int:
        x = np.asarray(x, dtype=np.float64).ravel()
        match = np.all(self.domain == x, axis=1)
        hits = np.flatnonzero(match)
        if hits.size == 0:
            raise UsageError(f"point {x} is not in the domain grid")
        return int(hits[0])

    # --- queries used by policies (arm-index based) ---

    def observe_arm(self, t: int, arm: int, rng) -> float:
        f = self.function_at(t)
        noise = self.rho * rng.standard_normal() if self.rho > 0 else 0.0
        return float(f.grid_values[arm] + noise)

    def regret_arm(self, t: int, arm: int) -> float:
        f = self.function_at(t)
        return float(f.max_value - f.grid_values[arm])

    @property
    def measured_B(self) -> float:
        """Max RKHS norm across the schedule (Assumption-2 bound, tight)."""
        return max(f.rkhs_norm for _, f in self.schedule)


def env_observe(env: NonStationaryEnv, t: int, x, rng) -> float:
    """Noisy observation f_t(x) + rho * N(0, 1) at a grid point x."""
    return env.observe_arm(t, env.arm_index(x), rng)


def env_regret(env: NonStationaryEnv, t: int, x) -> float:
    """Instantaneous regret max_grid f_t - f_t(x); exact, noise-free."""
    return env.regret_arm(t, env.arm_index(x))


def env_total_variation(env: NonStationaryEnv) -> float:
    """Exact sum of sup-over-grid gaps across schedule breakpoints."""
    tv = 0.0
    for (_, f_prev), (_, f_next) in zip(env.schedule, env.schedule[1:]):
        tv += float(np.max(np.abs(f_next.grid_values - f_prev.grid_values)))
    return tv


def build_abrupt_env(spec: KernelSpec, U: int, domain, T: int, rho: float,
                     rng) -> NonStationaryEnv:
    """Three independent base functions with breakpoints at floor(T/5)+1 and
    floor(2T/5)+1."""
    if T < 5:
        raise ConfigurationError(f"abrupt schedule needs T >= 5, got {T}")
    domain = np.atleast_2d(np.asarray(domain, dtype=np.float64))
    fns = [sample_rkhs_function(spec, U, domain, rng) for _ in range(3)]
    schedule = ((1, fns[0]), (T // 5 + 1, fns[1]), (2 * T // 5 + 1, fns[2]))
    return NonStationaryEnv(domain, schedule, rho, T)


def build_interval_env(spec: KernelSpec, U: int, domain, T: int, H: int,
                       rho: float, rng) -> NonStationaryEnv:
    """ceil(T/H) segments of length H (last possibly shorter), each with an
    independently sampled reward function.  Adversarial stress environment
    shaped like the interval-partition lower-bound construction."""
    if not 1 <= H <= T:
        raise ConfigurationError(f"H must be in [1, T], got H={H}, T={T}")
    domain = np.atleast_2d(np.asarray(domain, dtype=np.float64))
    n_seg = -(-T // H)
    schedule = tuple(
        (1 + i * H, sample_rkhs_function(spec, U, domain, rng))
        for i in range(n_seg)
    )
    return NonStationaryEnv(domain, schedule, rho, T)


def build_stationary_env(spec: KernelSpec, U: int, domain, T: int, rho: float,
                         rng) -> NonStationaryEnv:
    """Single reward function over the whole horizon."""
    domain = np.atleast_2d(np.asarray(domain, dtype=np.float64))
    f = sample_rkhs_function(spec, U, domain, rng)
    return NonStationaryEnv(domain, ((1, f),), rho, T)
