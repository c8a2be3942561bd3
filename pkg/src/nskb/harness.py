"""Experiment orchestration: config parsing, run fan-out, CSV/manifest
persistence, aggregation across seeds, and SVG plot emission.

The config file is YAML; see README for the schema.  Every auto-resolved
quantity (H, W, beta, measured V_T and B, MIG proxy) is echoed into the
manifest so a run is fully reproducible from its output directory alone.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from nskb import algorithms as alg
from nskb import environment as envmod
from nskb.environment import UsageError
from nskb.gp import greedy_mig_sequence
from nskb.kernels import ConfigurationError, KernelSpec

POLICY_NAMES = ("rperp", "r_gp_ucb", "sw_gp_ucb", "random")


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    environment: dict
    policies: list
    seeds: list
    delta: float
    master_seed: int
    output_dir: str
    plot: bool
    workers: int

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        env = raw.get("environment")
        if not isinstance(env, dict):
            raise ConfigurationError("environment: section is required")
        for key in ("type", "kernel", "T"):
            if key not in env:
                raise ConfigurationError(f"environment.{key}: missing")
        if env["type"] not in ("abrupt", "interval", "stationary"):
            raise ConfigurationError(
                f"environment.type: unknown type {env['type']!r}")
        policies = raw.get("policies")
        if not policies:
            raise ConfigurationError("policies: at least one policy required")
        for i, pol in enumerate(policies):
            if pol.get("name") not in POLICY_NAMES:
                raise ConfigurationError(
                    f"policies[{i}].name: must be one of {POLICY_NAMES}")
        seeds = raw.get("seeds")
        if not seeds:
            raise ConfigurationError("seeds: at least one seed required")
        delta = float(raw.get("delta", 0.1))
        if not 0 < delta < 1:
            raise ConfigurationError(f"delta: must be in (0, 1), got {delta}")
        master_seed = int(os.environ.get("NSKB_SEED",
                                         raw.get("master_seed", 0)))
        return cls(environment=env, policies=policies,
                   seeds=[int(s) for s in seeds], delta=delta,
                   master_seed=master_seed,
                   output_dir=str(raw.get("output_dir", "out")),
                   plot=bool(raw.get("plot", False)),
                   workers=int(raw.get("workers", 1)))

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))


def _kernel_from_dict(kd: dict) -> KernelSpec:
    family = kd.get("family")
    if family not in ("se", "matern"):
        raise ConfigurationError(
            f"environment.kernel.family: must be se|matern, got {family!r}")
    return KernelSpec(family=family,
                      lengthscale=float(kd.get("lengthscale", 0.5)),
                      nu=float(kd["nu"]) if family == "matern" else None)


def build_environment(env_cfg: dict, spec: KernelSpec) -> envmod.NonStationaryEnv:
    grid_cfg = env_cfg.get("grid", {})
    domain = envmod.make_grid(int(grid_cfg.get("dim", 2)),
                              int(grid_cfg.get("per_axis", 30)))
    T = int(env_cfg["T"])
    U = int(env_cfg.get("U", 10))
    rho = float(env_cfg.get("rho", 0.1))
    rng = np.random.default_rng(int(env_cfg.get("seed", 0)))
    etype = env_cfg["type"]
    if etype == "abrupt":
        return envmod.build_abrupt_env(spec, U, domain, T, rho, rng)
    if etype == "interval":
        if "H" not in env_cfg:
            raise ConfigurationError("environment.H: required for interval type")
        return envmod.build_interval_env(spec, U, domain, T,
                                         int(env_cfg["H"]), rho, rng)
    return envmod.build_stationary_env(spec, U, domain, T, rho, rng)


# ---------------------------------------------------------------------------
# seed streams
# ---------------------------------------------------------------------------

def _policy_id(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "big")


def run_rng(master_seed: int, policy_name: str, seed: int) -> np.random.Generator:
    """Independent stream per (policy, seed); adding a policy never perturbs
    another policy's draws."""
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, _policy_id(policy_name), seed]))


# ---------------------------------------------------------------------------
# policy resolution and execution
# ---------------------------------------------------------------------------

def _measured_vt_or_none(env) -> float | None:
    vt = envmod.env_total_variation(env)
    return vt if vt > 0 else None


def resolve_policy(pol: dict, env, delta: float) -> dict:
    """Fill in auto H/W/beta for one policy against a built environment.

    Returns a fully resolved parameter dict (what the manifest echoes).
    """
    spec = env.schedule[0][1].spec
    d = env.domain.shape[1]
    vt = envmod.env_total_variation(env)
    name = pol["name"]
    resolved = {"name": name}
    if name == "random":
        return resolved
    lam = float(pol.get("lambda", 1.0))
    resolved["lambda"] = lam
    if name == "rperp":
        H = pol.get("H", "auto")
        if H == "auto":
            if vt > 0:
                H = alg.restart_interval(spec.family, env.T, vt, d, spec.nu,
                                         vt_known=bool(pol.get("vt_known", True)))
            else:
                H = env.T  # stationary: no restarts
        H = int(H)
        C = float(pol.get("C", 1.0))
        beta = pol.get("beta", "auto")
        if beta == "auto":
            beta = alg.beta_width(env.measured_B, env.rho, lam, C,
                                  env.n_arms, env.T, H, delta)
        resolved.update(H=H, C=C, beta_sqrt=float(beta),
                        beta_scale=float(pol.get("beta_scale", 1.0)),
                        measured_B=env.measured_B, measured_V_T=vt)
        return resolved
    # UCB baselines
    key = "H" if name == "r_gp_ucb" else "W"
    win = pol.get(key, "auto")
    if win == "auto":
        win = alg.baseline_window(spec.family, env.T, vt, d, spec.nu) \
            if vt > 0 else env.T
    win = int(win)
    gamma_seq = greedy_mig_sequence(spec, lam, env.domain, max(win, 1))
    resolved.update({key: win, "measured_B": env.measured_B,
                     "measured_V_T": vt,
                     "mig_proxy_at_window": float(gamma_seq[-1]),
                     "beta_sqrt_at_window": alg.ucb_beta_schedule(
                         env.measured_B, env.rho, lam, delta, gamma_seq)(win)})
    resolved["_gamma_seq"] = gamma_seq  # internal, stripped from manifest
    return resolved


def execute_run(env, resolved: dict, delta: float, rng) -> alg.RunRecord:
    name = resolved["name"]
    if name == "random":
        rec = alg.run_random(env, rng)
    elif name == "rperp":
        spec = env.schedule[0][1].spec
        cfg = alg.RPerpConfig(H=resolved["H"], beta_sqrt=resolved["beta_sqrt"],
                              lam=resolved["lambda"], kernel=spec,
                              beta_scale=resolved["beta_scale"])
        rec = alg.run_rperp(env, cfg, rng)
    else:
        sched = alg.ucb_beta_schedule(env.measured_B, env.rho,
                                      resolved["lambda"], delta,
                                      resolved["_gamma_seq"])
        if name == "r_gp_ucb":
            rec = alg.run_r_gp_ucb(env, resolved["H"], sched,
                                   resolved["lambda"], rng)
        else:
            rec = alg.run_sw_gp_ucb(env, resolved["W"], sched,
                                    resolved["lambda"], rng)
    return rec


def _worker(args):
    env, resolved, delta, master_seed, seed = args
    rng = run_rng(master_seed, resolved["name"], seed)
    rec = execute_run(env, resolved, delta, rng)
    rec.seed = seed
    return rec


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------

def run_experiment(config: ExperimentConfig):
    """Run every (kernel, policy, seed) combination and persist CSV+manifest.

    Returns {panel_label: {(policy, seed): RunRecord}}.  One CSV per kernel
    panel; a single kernel writes results.csv.
    """
    kernel_cfgs = config.environment["kernel"]
    if isinstance(kernel_cfgs, dict):
        kernel_cfgs = [kernel_cfgs]
    os.makedirs(config.output_dir, exist_ok=True)

    manifest = {"delta": config.delta, "seeds": config.seeds,
                "master_seed": config.master_seed, "panels": {}}
    all_records = {}
    for kd in kernel_cfgs:
        spec = _kernel_from_dict(kd)
        label = spec.family
        env = build_environment(config.environment, spec)
        resolved_policies = [resolve_policy(p, env, config.delta)
                             for p in config.policies]
        tasks = [(env, rp, config.delta, config.master_seed, seed)
                 for rp in resolved_policies for seed in config.seeds]
        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_worker, tasks))
        else:
            results = [_worker(t) for t in tasks]
        records = {(rec.policy, rec.seed): rec for rec in results}
        all_records[label] = records

        fname = "results.csv" if len(kernel_cfgs) == 1 else f"results_{label}.csv"
        write_csv(os.path.join(config.output_dir, fname), records)
        manifest["panels"][label] = {
            "kernel": {"family": spec.family,
                       "lengthscale": spec.lengthscale, "nu": spec.nu},
            "environment": {
                "type": config.environment["type"],
                "T": env.T, "rho": env.rho, "n_arms": env.n_arms,
                "U": int(config.environment.get("U", 10)),
                "seed": int(config.environment.get("seed", 0)),
                "breakpoints": [int(s) for s, _ in env.schedule],
                "measured_V_T": envmod.env_total_variation(env),
                "measured_B": env.measured_B,
            },
            "policies": [{k: v for k, v in rp.items()
                          if not k.startswith("_")}
                         for rp in resolved_policies],
            "csv": fname,
        }
    manifest_path = os.path.join(config.output_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if config.plot:
        panels = {label: aggregate(list(records.values()))
                  for label, records in all_records.items()}
        emit_plot(panels, os.path.join(config.output_dir, "regret.svg"))
    return all_records


def write_csv(path: str, records: dict) -> None:
    """Rows {policy, seed, t, arm_index, y, inst_regret, cum_regret},
    deterministically ordered, repr-formatted floats."""
    keys = sorted(records.keys())
    with open(path, "w") as fh:
        fh.write("policy,seed,t,arm_index,y,inst_regret,cum_regret\n")
        for policy, seed in keys:
            rec = records[(policy, seed)]
            cum = rec.cum_regret
            for t in range(rec.T):
                fh.write(f"{policy},{seed},{t + 1},{rec.arms[t]},"
                         f"{float(rec.observations[t])!r},"
                         f"{float(rec.inst_regret[t])!r},"
                         f"{float(cum[t])!r}\n")


def read_csv(path: str) -> dict:
    """Parse an emitted CSV back into per-(policy, seed) trace arrays."""
    out: dict = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        assert header[0] == "policy"
        for line in fh:
            pol, seed, t, arm, y, inst, cum = line.rstrip("\n").split(",")
            key = (pol, int(seed))
            out.setdefault(key, {"t": [], "arm": [], "y": [],
                                 "inst_regret": [], "cum_regret": []})
            row = out[key]
            row["t"].append(int(t))
            row["arm"].append(int(arm))
            row["y"].append(float(y))
            row["inst_regret"].append(float(inst))
            row["cum_regret"].append(float(cum))
    for row in out.values():
        for k in row:
            row[k] = np.asarray(row[k])
    return out


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

@dataclass
class AggregateCurve:
    """Per-step mean cumulative regret and standard error across seeds."""

    policy: str
    mean: np.ndarray
    stderr: np.ndarray
    n_seeds: int


def aggregate(records) -> dict:
    """Per-policy mean/stderr curves; all records must share one horizon."""
    horizons = {rec.T for rec in records}
    if len(horizons) != 1:
        raise UsageError(f"records mix horizons: {sorted(horizons)}")
    by_policy: dict = {}
    for rec in records:
        by_policy.setdefault(rec.policy, []).append(rec.cum_regret)
    curves = {}
    for policy, series in sorted(by_policy.items()):
        stack = np.stack(series)
        mean = stack.mean(axis=0)
        n = stack.shape[0]
        stderr = (stack.std(axis=0, ddof=1) / math.sqrt(n) if n > 1
                  else np.zeros_like(mean))
        curves[policy] = AggregateCurve(policy, mean, stderr, n)
    return curves


def aggregate_from_csv(path: str) -> dict:
    """Re-aggregate an emitted CSV (round-trip check helper)."""
    rows = read_csv(path)
    by_policy: dict = {}
    for (policy, _seed), row in rows.items():
        by_policy.setdefault(policy, []).append(row["cum_regret"])
    curves = {}
    for policy, series in sorted(by_policy.items()):
        stack = np.stack(series)
        n = stack.shape[0]
        stderr = (stack.std(axis=0, ddof=1) / math.sqrt(n) if n > 1
                  else np.zeros(stack.shape[1]))
        curves[policy] = AggregateCurve(policy, stack.mean(axis=0), stderr, n)
    return curves


# ---------------------------------------------------------------------------
# SVG plot
# ---------------------------------------------------------------------------

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_PANEL_W, _PANEL_H = 560, 420
_MARGIN = 60


def _panel_svg(label: str, curves: dict, x_off: int) -> list:
    T = len(next(iter(curves.values())).mean)
    y_max = max(float((c.mean + c.stderr).max()) for c in curves.values())
    y_max = y_max if y_max > 0 else 1.0
    x0, y0 = x_off + _MARGIN, _MARGIN // 2
    w, h = _PANEL_W - 2 * _MARGIN, _PANEL_H - _MARGIN - y0

    def sx(t):  # t in [1, T]
        return x0 + w * (t - 1) / max(T - 1, 1)

    def sy(v):
        return y0 + h * (1.0 - v / y_max)

    parts = [f'<line x1="{x0}" y1="{y0 + h}" x2="{x0 + w}" y2="{y0 + h}" '
             f'stroke="black"/>',
             f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y0 + h}" '
             f'stroke="black"/>',
             f'<text x="{x0 + w // 2}" y="{y0 + h + 35}" text-anchor="middle" '
             f'font-size="13">t</text>',
             f'<text x="{x0 - 45}" y="{y0 + h // 2}" font-size="13" '
             f'transform="rotate(-90 {x0 - 45} {y0 + h // 2})" '
             f'text-anchor="middle">cumulative regret</text>',
             f'<text x="{x0 + w // 2}" y="{y0 - 8}" text-anchor="middle" '
             f'font-size="14" font-weight="bold">{label}</text>',
             f'<text x="{x0 - 8}" y="{y0 + h + 4}" text-anchor="end" '
             f'font-size="11">0</text>',
             f'<text x="{x0 - 8}" y="{y0 + 4}" text-anchor="end" '
             f'font-size="11">{y_max:.3g}</text>',
             f'<text x="{x0 + w}" y="{y0 + h + 18}" text-anchor="middle" '
             f'font-size="11">{T}</text>']
    ts = np.arange(1, T + 1)
    for idx, (policy, c) in enumerate(sorted(curves.items())):
        color = _COLORS[idx % len(_COLORS)]
        if c.n_seeds > 1:
            upper = [f"{sx(t):.2f},{sy(v):.2f}"
                     for t, v in zip(ts, c.mean + c.stderr)]
            lower = [f"{sx(t):.2f},{sy(v):.2f}"
                     for t, v in zip(ts[::-1], (c.mean - c.stderr)[::-1])]
            parts.append(f'<polygon points="{" ".join(upper + lower)}" '
                         f'fill="{color}" opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(ts, c.mean))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        lx, ly = x0 + 10, y0 + 16 + 16 * idx
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly}" font-size="12">'
                     f'{policy}</text>')
    return parts


def emit_plot(panels: dict, path: str) -> None:
    """Write a self-contained SVG: one panel per entry of ``panels``
    ({label: {policy: AggregateCurve}}), one polyline per policy with a
    shaded one-standard-error band."""
    if panels and all(isinstance(v, AggregateCurve) for v in panels.values()):
        panels = {"": panels}  # flat {policy: curve} dict: single panel
    if not panels or any(not curves for curves in panels.values()):
        raise UsageError("emit_plot needs at least one non-empty curve set")
    width = _PANEL_W * len(panels)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{_PANEL_H}" viewBox="0 0 {width} {_PANEL_H}">',
             f'<rect width="{width}" height="{_PANEL_H}" fill="white"/>']
    for i, (label, curves) in enumerate(panels.items()):
        parts.extend(_panel_svg(label, curves, i * _PANEL_W))
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
