"""End-to-end acceptance suite.

One test per criterion; each prints a single machine-readable pass/fail line
of the form ``[acceptance N] <name>: PASS|FAIL``.
"""
import itertools
import math
import os
import time

import mpmath
import numpy as np
import yaml
from scipy.stats import chisquare

from nskb.algorithms import (RPerpConfig, baseline_window, batch_schedule,
                             beta_width, permute_candidates, restart_interval,
                             run_rperp)
from nskb.cli import main
from nskb.environment import (build_abrupt_env, build_stationary_env,
                              make_grid)
from nskb.gp import fit_posterior, posterior_mean, posterior_variance
from nskb.harness import ExperimentConfig, run_experiment
from nskb.kernels import KernelSpec, cross_gram, gram_matrix
from nskb.theory import (LOWER_BOUND, OPKB_UPPER, RPERP_UPPER, UCB_UPPER,
                         RateQuery, rate_value)

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIG_DIR = os.path.join(HERE, "..", "configs")


def _report(num, name, ok, detail=""):
    line = f"[acceptance {num}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    return line


def test_1_posterior_oracle_equivalence():
    rng = np.random.default_rng(2024)
    spec = KernelSpec("se", 0.5)
    start = time.time()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 51))
        lam = float(rng.uniform(0.1, 2.0))
        X = rng.uniform(0, 1, size=(n, 2))
        y = rng.normal(size=n)
        Xq = rng.uniform(0, 1, size=(20, 2))
        model = fit_posterior(spec, lam, X, y)
        mu = posterior_mean(model, Xq)
        var = posterior_variance(model, Xq)
        A = gram_matrix(spec, X) + lam * np.eye(n)
        kq = cross_gram(spec, X, Xq)
        mu_ref = kq.T @ np.linalg.solve(A, y)
        var_ref = 1.0 - np.einsum("ij,ij->j", kq, np.linalg.solve(A, kq))
        worst = max(worst, np.abs(mu - mu_ref).max(),
                    np.abs(var - var_ref).max())
    elapsed = time.time() - start
    ok = worst < 1e-8 and elapsed < 10.0
    line = _report(1, "posterior oracle equivalence", ok,
                   f"max err {worst:.2e}, {elapsed:.2f}s")
    assert ok, line


def test_2_batch_schedule():
    ok = batch_schedule(100) == [10, 32, 57, 1]
    for T_i in (2, 10, 100, 1000, 5000):
        sched = batch_schedule(T_i)
        ok = ok and sum(sched) == T_i
        eliminating = len(sched) - 1
        ok = ok and eliminating <= 1 + math.log2(math.log2(T_i))
    line = _report(2, "batch schedule recurrence", ok)
    assert ok, line


def test_3_theorem6_coverage():
    T, H, delta, runs = 400, 100, 0.1, 200
    grid = make_grid(2, 10)
    spec = KernelSpec("se", 0.5)
    env = build_abrupt_env(spec, 10, grid, T, 0.1, np.random.default_rng(7))
    beta = beta_width(env.measured_B, env.rho, 1.0, 1.0, env.n_arms, T, H,
                      delta)
    cfg = RPerpConfig(H=H, beta_sqrt=beta, lam=1.0, kernel=spec)
    grid_vals = np.stack([env.function_at(t).grid_values
                          for t in range(1, T + 1)])
    start = time.time()
    covered_runs = 0
    for seed in range(runs):
        covered = True

        def hook(info):
            nonlocal covered
            lo, hi = info["step_range"]
            favg = grid_vals[lo - 1:hi].mean(axis=0)
            if not (np.all(info["lcb"] <= favg + 1e-12)
                    and np.all(favg <= info["ucb"] + 1e-12)):
                covered = False

        run_rperp(env, cfg, np.random.default_rng(seed), batch_hook=hook)
        covered_runs += covered
    elapsed = time.time() - start
    rate = covered_runs / runs
    threshold = 0.9 - 2 * math.sqrt(0.9 * 0.1 / runs)
    ok = rate >= threshold and elapsed < 300
    line = _report(3, "Theorem-6 coverage", ok,
                   f"{covered_runs}/{runs} covered, need >= {threshold:.4f}, "
                   f"{elapsed:.1f}s")
    assert ok, line


def test_4_default_experiment_properties(tmp_path):
    cfg_path = os.path.join(CONFIG_DIR, "figure2.yaml")
    with open(cfg_path) as fh:
        raw = yaml.safe_load(fh)
    raw["output_dir"] = str(tmp_path / "fig2")
    cfg = ExperimentConfig.from_dict(raw)
    start = time.time()
    all_records = run_experiment(cfg)
    elapsed = time.time() - start
    seeds = cfg.seeds
    ok_a = ok_b = True
    c_notes = []
    details = []
    for label, records in all_records.items():
        rperp_final = np.mean([records[("rperp", s)].cum_regret[-1]
                               for s in seeds])
        random_final = np.mean([records[("random", s)].cum_regret[-1]
                                for s in seeds])
        rgp_final = np.mean([records[("r_gp_ucb", s)].cum_regret[-1]
                             for s in seeds])
        early = np.mean([records[("rperp", s)].inst_regret[:1000].mean()
                         for s in seeds])
        late = np.mean([records[("rperp", s)].inst_regret[3999:5000].mean()
                        for s in seeds])
        ok_a = ok_a and rperp_final < random_final
        ok_b = ok_b and late < early
        c_notes.append((label, rgp_final <= rperp_final, rgp_final,
                        rperp_final))
        details.append(f"{label}: rperp {rperp_final:.0f} vs random "
                       f"{random_final:.0f}, per-step early {early:.3f} "
                       f"late {late:.3f}")
    ok = ok_a and ok_b and elapsed < 1800
    for label, c_ok, rgp, rp in c_notes:
        print(f"[acceptance 4c] ordering check ({label}): "
              f"{'PASS' if c_ok else 'FAIL (informational, non-fatal)'} "
              f"(r_gp_ucb {rgp:.0f} vs rperp {rp:.0f})", flush=True)
    line = _report(4, "default-experiment qualitative properties", ok,
                   "; ".join(details) + f"; {elapsed:.0f}s")
    assert ok, line


def test_5_never_eliminate_optimum():
    grid = make_grid(2, 5)
    spec = KernelSpec("se", 0.5)
    T, H = 200, 50
    ok = True
    for seed in range(50):
        env = build_stationary_env(spec, 5, grid, T, 0.0,
                                   np.random.default_rng(seed))
        star = env.schedule[0][1].argmax_index
        beta = beta_width(env.measured_B, 0.0, 1.0, 1.0, env.n_arms, T, H,
                          0.1)
        cfg = RPerpConfig(H=H, beta_sqrt=beta, lam=1.0, kernel=spec)
        survived = []
        run_rperp(env, cfg, np.random.default_rng(10_000 + seed),
                  batch_hook=lambda i: survived.append(
                      star in i["active_after"]))
        ok = ok and len(survived) > 0 and all(survived)
    line = _report(5, "never-eliminate-optimum (noiseless)", ok,
                   "50 seeds")
    assert ok, line


def test_6_permutation_uniformity():
    rng = np.random.default_rng(123)
    index = {perm: i for i, perm in
             enumerate(itertools.permutations(range(5)))}
    counts = np.zeros(120)
    for _ in range(60000):
        out = tuple(permute_candidates(np.arange(5), rng).tolist())
        counts[index[out]] += 1
    p = chisquare(counts).pvalue
    ok = p > 0.001
    line = _report(6, "permutation uniformity", ok, f"chi-square p={p:.4f}")
    assert ok, line


def test_7_formula_calculators_high_precision():
    rng = np.random.default_rng(7)
    ok = True
    worst = 0.0
    with mpmath.workdps(50):
        for _ in range(20):
            T = int(rng.integers(10, 10 ** 6))
            V = float(rng.uniform(0.01, 10.0))
            d = int(rng.integers(1, 5))
            nu = float(rng.uniform(0.6, 4.0))
            mT, mV, mnu = mpmath.mpf(T), mpmath.mpf(V), mpmath.mpf(nu)
            lnT = mpmath.log(mT)

            # restart_interval, both families
            ref = int(min(max(mpmath.ceil(
                mT ** mpmath.mpf("2/3") * mV ** mpmath.mpf("-2/3")
                * lnT ** (mpmath.mpf(d + 2) / 3)), 2), T))
            ok = ok and restart_interval("se", T, V, d) == ref
            e = (2 * mnu + d) / (3 * mnu + d)
            ref = int(min(max(mpmath.ceil(
                mT ** e * mV ** (-e)
                * lnT ** ((4 * mnu + d) / (6 * mnu + 2 * d))), 2), T))
            ok = ok and restart_interval("matern", T, V, d, nu) == ref

            # baseline_window, both families
            g_se = lnT ** (d + 1)
            ref = int(min(max(mpmath.ceil(
                g_se ** mpmath.mpf("0.25") * mpmath.sqrt(mT / mV)), 1), T))
            ok = ok and baseline_window("se", T, V, d) == ref
            g_mat = mT ** (mpmath.mpf(d) / (2 * mnu + d)) \
                * lnT ** (2 * mnu / (2 * mnu + d))
            ref = int(min(max(mpmath.ceil(
                g_mat ** mpmath.mpf("0.25") * mpmath.sqrt(mT / mV)), 1), T))
            ok = ok and baseline_window("matern", T, V, d, nu) == ref

            # beta_width
            B = float(rng.uniform(0.5, 5.0))
            rho = float(rng.uniform(0.01, 1.0))
            lam = float(rng.uniform(0.1, 2.0))
            C = float(rng.uniform(0.1, 2.0))
            n_arms = int(rng.integers(4, 2000))
            H = int(rng.integers(2, T + 1))
            delta = float(rng.uniform(0.01, 0.5))
            Q = mpmath.ceil(mT / H) * (1 + mpmath.log(mpmath.log(H, 2), 2))
            L = mpmath.log(4 * n_arms * Q / mpmath.mpf(delta))
            ref_b = (mpmath.mpf(B) * (mpmath.mpf(C) / mpmath.sqrt(lam)
                                      * mpmath.sqrt(L) + 1)
                     + mpmath.mpf(rho) / mpmath.sqrt(lam) * mpmath.sqrt(2 * L))
            got = beta_width(B, rho, lam, C, n_arms, T, H, delta)
            err = abs(got - float(ref_b)) / float(ref_b)
            worst = max(worst, err)
            ok = ok and err < 1e-10

            # rate_value (all four regret rates, both families)
            refs = {
                ("se", LOWER_BOUND): mT ** mpmath.mpf("2/3")
                * mV ** mpmath.mpf("1/3") * lnT ** (mpmath.mpf(d) / 6),
                ("se", RPERP_UPPER): mT ** mpmath.mpf("2/3")
                * mV ** mpmath.mpf("1/3"),
                ("se", UCB_UPPER): mT ** mpmath.mpf("0.75")
                * mV ** mpmath.mpf("0.25"),
                ("se", OPKB_UPPER): mT ** mpmath.mpf("2/3")
                * mV ** mpmath.mpf("1/3"),
                ("matern", LOWER_BOUND): mT ** ((2 * mnu + d) / (3 * mnu + d))
                * mV ** (mnu / (3 * mnu + d)),
                ("matern", RPERP_UPPER): mT ** ((2 * mnu + d) / (3 * mnu + d))
                * mV ** (mnu / (3 * mnu + d)),
                ("matern", UCB_UPPER):
                mT ** ((12 * mnu + 13 * d) / (16 * mnu + 8 * d))
                * mV ** mpmath.mpf("0.25"),
                ("matern", OPKB_UPPER):
                mT ** ((4 * mnu + 3 * d) / (6 * mnu + 3 * d))
                * mV ** mpmath.mpf("1/3"),
            }
            for (family, which), ref_v in refs.items():
                got, _ = rate_value(RateQuery(
                    family, T, V, d, nu if family == "matern" else None,
                    which))
                err = abs(got - float(ref_v)) / float(ref_v)
                worst = max(worst, err)
                ok = ok and err < 1e-10
    line = _report(7, "formula calculators vs high precision", ok,
                   f"worst rel err {worst:.2e}")
    assert ok, line


def test_8_cli_determinism(tmp_path):
    cfg_src = os.path.join(CONFIG_DIR, "quick.yaml")
    with open(cfg_src) as fh:
        raw = yaml.safe_load(fh)
    cfg_path = str(tmp_path / "cfg.yaml")
    with open(cfg_path, "w") as fh:
        yaml.safe_dump(raw, fh)
    outs = []
    for run_dir in ("a", "b"):
        out = str(tmp_path / run_dir)
        assert main(["run", "--config", cfg_path, "--out", out]) == 0
        outs.append(out)
    csv_a = open(os.path.join(outs[0], "results.csv"), "rb").read()
    csv_b = open(os.path.join(outs[1], "results.csv"), "rb").read()
    man_a = open(os.path.join(outs[0], "manifest.json"), "rb").read()
    man_b = open(os.path.join(outs[1], "manifest.json"), "rb").read()
    ok = csv_a == csv_b and man_a == man_b
    line = _report(8, "CLI determinism (byte-identical outputs)", ok,
                   f"{len(csv_a)} CSV bytes compared")
    assert ok, line
