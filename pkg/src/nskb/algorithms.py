"""Policies: restarting phased elimination with random permutation (R-PERP)
and the three baselines (restart GP-UCB, sliding-window GP-UCB, random).

All policies are step-driven loops over the environment's arm grid producing
a RunRecord; a run owns its RNG, so identical (config, seed) yields a
bit-identical trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from nskb import _backend
from nskb.environment import NonStationaryEnv, UsageError
from nskb.gp import fit_posterior, greedy_mig_sequence, posterior_variance
from nskb.kernels import ConfigurationError, KernelSpec, cross_gram, gram_matrix

SE_FAMILY = "se"
MATERN_FAMILY = "matern"


# ---------------------------------------------------------------------------
# schedule / width calculators
# ---------------------------------------------------------------------------

def batch_size(T_i: int, N_prev: int, consumed: int) -> int:
    """Next batch size: min(ceil(sqrt(T_i * N_prev)), remaining budget)."""
    if consumed >= T_i:
        raise UsageError(f"interval already exhausted ({consumed} >= {T_i})")
    if N_prev < 1:
        raise ValueError(f"N_prev must be >= 1, got {N_prev}")
    # exact integer ceil(sqrt(.)), immune to float rounding
    return min(math.isqrt(T_i * N_prev - 1) + 1, T_i - consumed)


def batch_schedule(T_i: int) -> list[int]:
    """Full batch-size sequence for an interval of length T_i."""
    sizes: list[int] = []
    consumed, n_prev = 0, 1
    while consumed < T_i:
        n = batch_size(T_i, n_prev, consumed)
        sizes.append(n)
        consumed += n
        n_prev = n
    return sizes


def q_count(T: int, H: int) -> float:
    """ceil(T/H) * (1 + log2 log2 H); enters the confidence width."""
    if H < 2:
        raise ConfigurationError(f"H must be >= 2, got {H}")
    return math.ceil(T / H) * (1.0 + math.log2(math.log2(H)))


def beta_width(B: float, rho: float, lam: float, C: float, n_arms: int,
               T: int, H: int, delta: float) -> float:
    """Theoretical confidence width (square root of beta):

    B * (C lam^{-1/2} sqrt(ln(4 |X| Q / delta)) + 1)
      + rho lam^{-1/2} sqrt(2 ln(4 |X| Q / delta)),

    with Q = ceil(T/H) (1 + log2 log2 H).
    """
    if not (0 < delta < 1):
        raise ConfigurationError(f"delta must be in (0, 1), got {delta}")
    Q = q_count(T, H)
    log_term = math.log(4.0 * n_arms * Q / delta)
    return (B * (C / math.sqrt(lam) * math.sqrt(log_term) + 1.0)
            + rho / math.sqrt(lam) * math.sqrt(2.0 * log_term))


def restart_interval(family: str, T: int, V_T: float, d: int,
                     nu: float | None = None, vt_known: bool = True) -> int:
    """Theoretical restart interval H, clamped to [2, T].

    With known V_T:
      SE:     ceil(T^{2/3} V_T^{-2/3} (ln T)^{(d+2)/3})
      Matern: ceil(T^e V_T^{-e} (ln T)^{(4 nu + d)/(6 nu + 2 d)}),
              e = (2 nu + d)/(3 nu + d).
    With unknown V_T, the same expressions with the V_T factor dropped.
    """
    if T < 3:
        raise ConfigurationError(f"T must be >= 3, got {T}")
    lnT = math.log(T)
    if family == SE_FAMILY:
        expo, log_expo = 2.0 / 3.0, (d + 2) / 3.0
    elif family == MATERN_FAMILY:
        if nu is None or not nu > 0.5:
            raise ConfigurationError("Matern interval needs nu > 1/2")
        expo = (2 * nu + d) / (3 * nu + d)
        log_expo = (4 * nu + d) / (6 * nu + 2 * d)
    else:
        raise ConfigurationError(f"unknown family {family!r}")
    h = T ** expo * lnT ** log_expo
    if vt_known:
        if not V_T > 0:
            raise ConfigurationError(f"V_T must be > 0, got {V_T}")
        h *= V_T ** (-expo)
    return int(min(max(math.ceil(h), 2), T))


def mig_growth(family: str, T: int, d: int, nu: float | None = None) -> float:
    """MIG growth rate with unit constant: (ln T)^{d+1} for SE;
    T^{d/(2 nu + d)} (ln T)^{2 nu/(2 nu + d)} for Matern."""
    lnT = math.log(T)
    if family == SE_FAMILY:
        return lnT ** (d + 1)
    if family == MATERN_FAMILY:
        if nu is None or not nu > 0.5:
            raise ConfigurationError("Matern MIG growth needs nu > 1/2")
        return T ** (d / (2 * nu + d)) * lnT ** (2 * nu / (2 * nu + d))
    raise ConfigurationError(f"unknown family {family!r}")


def baseline_window(family: str, T: int, V_T: float, d: int,
                    nu: float | None = None) -> int:
    """Suggested restart interval / window for the UCB baselines:
    ceil(gamma_tilde^{1/4} (T / V_T)^{1/2}), clamped to [1, T]."""
    if T < 3:
        raise ConfigurationError(f"T must be >= 3, got {T}")
    if not V_T > 0:
        raise ConfigurationError(f"V_T must be > 0, got {V_T}")
    g = mig_growth(family, T, d, nu)
    w = g ** 0.25 * math.sqrt(T / V_T)
    return int(min(max(math.ceil(w), 1), T))


# ---------------------------------------------------------------------------
# elimination machinery
# ---------------------------------------------------------------------------

def select_candidates(spec: KernelSpec, lam: float, arms: np.ndarray,
                      N: int, exact_refit: bool = False) -> np.ndarray:
    """Greedy max-variance design over the arm subset.

    Returns the ordered index array (into ``arms``) of N picks, each
    maximizing the posterior variance given lam and the picks so far (no
    targets involved).  Ties break toward the lowest index.  ``exact_refit``
    recomputes every variance by a full refit instead of the incremental
    backend (testing only).
    """
    arms = np.atleast_2d(np.asarray(arms, dtype=np.float64))
    if arms.shape[0] == 0:
        raise ValueError("arm set must be non-empty")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if exact_refit:
        picks: list[int] = []
        for _ in range(N):
            model = fit_posterior(spec, lam, arms[picks])
            var = posterior_variance(model, arms)
            picks.append(int(np.argmax(var)))
        return np.asarray(picks, dtype=np.int64)
    K = gram_matrix(spec, arms)
    sel, _ = _backend.greedy_max_variance(K, lam, N)
    return sel


def permute_candidates(order, rng) -> np.ndarray:
    """Uniformly random reordering (Fisher-Yates); multiset preserved."""
    out = np.asarray(order).copy()
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        out[i], out[j] = out[j], out[i]
    return out


def eliminate(arm_ids, lcb, ucb) -> np.ndarray:
    """Keep arms whose UCB is at least the best LCB over the set.  Never
    empty: the LCB-maximizing arm survives since its UCB >= its LCB."""
    arm_ids = np.asarray(arm_ids)
    keep = np.asarray(ucb) >= np.max(lcb)
    return arm_ids[keep]


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """Per-step trace of one policy run plus bookkeeping counters."""

    policy: str
    seed: int
    T: int
    arms: np.ndarray            # (T,) chosen arm indices
    observations: np.ndarray    # (T,)
    inst_regret: np.ndarray     # (T,)
    config: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)

    @property
    def cum_regret(self) -> np.ndarray:
        return np.cumsum(self.inst_regret)


# ---------------------------------------------------------------------------
# R-PERP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RPerpConfig:
    H: int
    beta_sqrt: float
    lam: float
    kernel: KernelSpec
    beta_scale: float = 1.0

    def __post_init__(self):
        if self.H < 2:
            raise ConfigurationError(f"H must be >= 2, got {self.H}")
        if not self.beta_sqrt > 0:
            raise ConfigurationError(f"beta_sqrt must be > 0, got {self.beta_sqrt}")
        if not self.beta_scale > 0:
            raise ConfigurationError(f"beta_scale must be > 0, got {self.beta_scale}")


def _grid_bounds(spec, lam, design, y, domain, width):
    """LCB/UCB over the whole grid from a batch's own (X, y)."""
    model = fit_posterior(spec, lam, design, y)
    v = solve_triangular(model.factor, cross_gram(spec, design, domain), lower=True)
    mu = v.T @ solve_triangular(model.factor, y, lower=True)
    sig = np.sqrt(np.maximum(1.0 - np.einsum("ij,ij->j", v, v), 1e-12))
    return mu - width * sig, mu + width * sig


def run_rperp(env: NonStationaryEnv, config: RPerpConfig, rng,
              batch_hook=None) -> RunRecord:
    """Restarting phased elimination with random permutation.

    Per interval the potential-maximizer set resets to the full grid; per
    batch, candidates are picked greedily by posterior variance, uniformly
    permuted, and observed.  A batch that exactly exhausts the interval
    budget is recorded for regret but triggers no fit or elimination;
    otherwise a GP fitted on the batch's own data alone drives the UCB/LCB
    elimination.

    ``batch_hook(info)`` fires after each eliminating batch with the interval
    and batch indices, the 1-based inclusive step range, the surviving arm
    sets, and the per-arm bounds over the full grid (used by coverage tests).
    """
    T, n_arms = env.T, env.n_arms
    if not 2 <= config.H <= T:
        raise ConfigurationError(f"H must be in [2, T], got {config.H}")
    spec, lam = config.kernel, config.lam
    width = config.beta_sqrt * config.beta_scale

    arms_chosen = np.empty(T, dtype=np.int64)
    obs = np.empty(T)
    regret = np.empty(T)
    n_intervals = math.ceil(T / config.H)
    batches_per_interval: list[int] = []
    eliminations: list[int] = []

    t = 0  # zero-based global step counter
    for i in range(n_intervals):
        T_i = min(config.H, T - i * config.H)
        active = np.arange(n_arms)
        n_prev = 1
        consumed = 0
        n_batches = 0
        while consumed < T_i:
            N_j = batch_size(T_i, n_prev, consumed)
            local = select_candidates(spec, lam, env.domain[active], N_j)
            order = permute_candidates(active[local], rng)
            y = np.empty(N_j)
            step_lo = t
            for m in range(N_j):
                arm = int(order[m])
                y[m] = env.observe_arm(t + 1, arm, rng)
                arms_chosen[t] = arm
                obs[t] = y[m]
                regret[t] = env.regret_arm(t + 1, arm)
                t += 1
            consumed += N_j
            n_prev = N_j
            n_batches += 1
            if consumed >= T_i:
                break  # lines 14-16: move to the next interval, no elimination
            lcb, ucb = _grid_bounds(spec, lam, env.domain[order], y,
                                    env.domain, width)
            new_active = eliminate(active, lcb[active], ucb[active])
            eliminations.append(len(active) - len(new_active))
            if batch_hook is not None:
                batch_hook({
                    "interval": i,
                    "batch": n_batches - 1,
                    "step_range": (step_lo + 1, t),
                    "active_before": active,
                    "active_after": new_active,
                    "lcb": lcb,
                    "ucb": ucb,
                })
            active = new_active
        batches_per_interval.append(n_batches)
    counters = {
        "intervals": n_intervals,
        "batches_per_interval": batches_per_interval,
        "eliminations_per_batch": eliminations,
        "beta_sqrt_effective": width,
        "beta_scale_deviation": config.beta_scale != 1.0,
    }
    return RunRecord("rperp", -1, T, arms_chosen, obs, regret,
                     config={"H": config.H, "beta_sqrt": config.beta_sqrt,
                             "lam": lam, "beta_scale": config.beta_scale},
                     counters=counters)


# ---------------------------------------------------------------------------
# UCB baselines
# ---------------------------------------------------------------------------

def ucb_beta_schedule(B: float, rho: float, lam: float, delta: float,
                      gamma_seq) -> "callable":
    """Standard frequentist width B + (rho/sqrt(lam)) sqrt(2 (gamma_n + 1 +
    ln(1/delta))) as a function of the current design size n (n >= 0);
    ``gamma_seq[n-1]`` is the (greedy-bound) information gain of n points."""
    gamma_seq = np.asarray(gamma_seq, dtype=np.float64)

    def beta_sqrt(n_points: int) -> float:
        g = 0.0 if n_points == 0 else \
            float(gamma_seq[min(n_points, len(gamma_seq)) - 1])
        return B + rho / math.sqrt(lam) * math.sqrt(
            2.0 * (g + 1.0 + math.log(1.0 / delta)))

    return beta_sqrt


def _run_gp_ucb(env, policy_name, window_of, beta_schedule, lam, rng,
                extra_config) -> RunRecord:
    """Shared per-step GP-UCB loop; ``window_of(t)`` gives the 0-based slice
    of history used to fit at step t (restart and sliding-window variants)."""
    T = env.T
    spec = env.schedule[0][1].spec
    d = env.domain.shape[1]
    arms_chosen = np.empty(T, dtype=np.int64)
    obs = np.empty(T)
    regret = np.empty(T)
    max_fit = 0
    for t in range(T):
        lo, hi = window_of(t)
        idx = arms_chosen[lo:hi]
        X = env.domain[idx] if hi > lo else np.zeros((0, d))
        model = fit_posterior(spec, lam, X, obs[lo:hi])
        max_fit = max(max_fit, model.n)
        width = beta_schedule(model.n)
        if model.n == 0:
            mu = np.zeros(env.n_arms)
            sig = np.ones(env.n_arms)
        else:
            v = solve_triangular(model.factor,
                                 cross_gram(spec, X, env.domain), lower=True)
            mu = v.T @ solve_triangular(model.factor, obs[lo:hi], lower=True)
            sig = np.sqrt(np.maximum(1.0 - np.einsum("ij,ij->j", v, v), 1e-12))
        arm = int(np.argmax(mu + width * sig))
        arms_chosen[t] = arm
        obs[t] = env.observe_arm(t + 1, arm, rng)
        regret[t] = env.regret_arm(t + 1, arm)
    return RunRecord(policy_name, -1, T, arms_chosen, obs, regret,
                     config=dict(extra_config, lam=lam),
                     counters={"max_fitted_design": max_fit})


def run_r_gp_ucb(env: NonStationaryEnv, H: int, beta_schedule, lam: float,
                 rng) -> RunRecord:
    """GP-UCB with the restart-reset strategy: the fitted data is everything
    since the last reset; all data is discarded every H steps."""
    if not 1 <= H <= env.T:
        raise ConfigurationError(f"H must be in [1, T], got {H}")
    return _run_gp_ucb(env, "r_gp_ucb", lambda t: ((t // H) * H, t),
                       beta_schedule, lam, rng, {"H": H})


def run_sw_gp_ucb(env: NonStationaryEnv, W: int, beta_schedule, lam: float,
                  rng) -> RunRecord:
    """GP-UCB on a sliding window of the most recent W input-output pairs."""
    if not 1 <= W <= env.T:
        raise ConfigurationError(f"W must be in [1, T], got {W}")
    return _run_gp_ucb(env, "sw_gp_ucb", lambda t: (max(0, t - W), t),
                       beta_schedule, lam, rng, {"W": W})


def run_random(env: NonStationaryEnv, rng) -> RunRecord:
    """Uniformly random arm per step."""
    T = env.T
    arms_chosen = np.empty(T, dtype=np.int64)
    obs = np.empty(T)
    regret = np.empty(T)
    for t in range(T):
        arm = int(rng.integers(0, env.n_arms))
        arms_chosen[t] = arm
        obs[t] = env.observe_arm(t + 1, arm, rng)
        regret[t] = env.regret_arm(t + 1, arm)
    return RunRecord("random", -1, T, arms_chosen, obs, regret)


def resolve_ucb_beta_schedule(env: NonStationaryEnv, lam: float, delta: float,
                              window: int):
    """Precompute the greedy MIG sequence up to ``window`` points and build
    the UCB width schedule from the environment's measured norm bound."""
    spec = env.schedule[0][1].spec
    gamma_seq = greedy_mig_sequence(spec, lam, env.domain, max(window, 1))
    return ucb_beta_schedule(env.measured_B, env.rho, lam, delta, gamma_seq)
