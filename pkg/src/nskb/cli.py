"""Command-line interface.

Subcommands:
  nskb run    --config FILE [--out DIR] [--workers N] [--plot]
  nskb sweep  --config FILE --param PATH --values V1,V2,...
  nskb theory --family se|matern --T INT --vt REAL --d INT [--nu REAL]
  nskb mig    --family se|matern --grid N --T INT [--lengthscale L]
              [--nu REAL] [--lambda L] [--dim D]
"""
from __future__ import annotations

import argparse
import copy
import os
import sys

import yaml

from nskb.gp import greedy_mig_bound
from nskb.harness import ExperimentConfig, run_experiment
from nskb.kernels import KernelSpec
from nskb.theory import comparison_table


def _add_run(sub):
    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--plot", action="store_true")


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="re-run an experiment over config values")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True,
                   help="dotted config path, e.g. environment.rho")
    p.add_argument("--values", required=True,
                   help="comma-separated values to substitute")
    p.add_argument("--out", default=None)


def _add_theory(sub):
    p = sub.add_parser("theory", help="print the rate-comparison table")
    p.add_argument("--family", choices=["se", "matern"], required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--vt", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--nu", type=float, default=None)


def _add_mig(sub):
    p = sub.add_parser("mig", help="greedy upper bound on the max information gain")
    p.add_argument("--family", choices=["se", "matern"], required=True)
    p.add_argument("--grid", type=int, required=True, help="points per axis")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--lengthscale", type=float, default=0.5)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)


def _set_by_path(cfg: dict, path: str, value):
    keys = path.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node[k]
    leaf = keys[-1]
    old = node.get(leaf)
    if isinstance(old, bool):
        node[leaf] = value.lower() in ("1", "true", "yes")
    elif isinstance(old, int):
        node[leaf] = int(value)
    elif isinstance(old, float):
        node[leaf] = float(value)
    else:
        try:
            node[leaf] = float(value) if "." in value else int(value)
        except ValueError:
            node[leaf] = value


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.out:
        cfg.output_dir = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    if args.plot:
        cfg.plot = True
    run_experiment(cfg)
    print(f"results written to {cfg.output_dir}")
    return 0


def cmd_sweep(args) -> int:
    with open(args.config) as fh:
        raw = yaml.safe_load(fh)
    base_out = args.out or raw.get("output_dir", "out")
    for value in args.values.split(","):
        mod = copy.deepcopy(raw)
        _set_by_path(mod, args.param, value)
        cfg = ExperimentConfig.from_dict(mod)
        cfg.output_dir = os.path.join(
            base_out, f"{args.param.replace('.', '_')}={value}")
        run_experiment(cfg)
        print(f"{args.param}={value}: written to {cfg.output_dir}")
    return 0


def cmd_theory(args) -> int:
    rows = comparison_table(args.family, args.T, args.vt, args.d, args.nu)
    header = f"{'rate':<22}{'value':>16}  {'V_T admissible'}"
    print(header)
    print("-" * len(header))
    for row in rows:
        print(f"{row['rate']:<22}{row['value']:>16.6g}  "
              f"{'yes' if row['vt_admissible'] else 'no'}")
    return 0


def cmd_mig(args) -> int:
    from nskb.environment import make_grid
    spec = KernelSpec(args.family, args.lengthscale,
                      args.nu if args.family == "matern" else None)
    domain = make_grid(args.dim, args.grid)
    val = greedy_mig_bound(spec, args.lam, domain, args.T)
    print(f"greedy MIG bound (T={args.T}, {domain.shape[0]} arms): {val:.6f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nskb", description="non-stationary kernelized bandit simulations")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_sweep(sub)
    _add_theory(sub)
    _add_mig(sub)
    args = parser.parse_args(argv)
    return {"run": cmd_run, "sweep": cmd_sweep,
            "theory": cmd_theory, "mig": cmd_mig}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
