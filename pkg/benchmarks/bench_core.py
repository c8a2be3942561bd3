"""Benchmark the compiled greedy max-variance kernel against the numpy
fallback.

Run:  python3 benchmarks/bench_core.py
"""
import time

import numpy as np

from nskb import _backend
from nskb._core_py import greedy_max_variance as py_greedy
from nskb.environment import make_grid
from nskb.kernels import KernelSpec, gram_matrix

try:
    from nskb._core import greedy_max_variance as cy_greedy
    HAVE_CYTHON = True
except ImportError:
    cy_greedy = None
    HAVE_CYTHON = False


def bench(fn, K, lam, n_picks, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        picks, _ = fn(K, lam, n_picks)
        best = min(best, time.perf_counter() - t0)
    return best, picks


def main():
    print(f"active backend: {_backend.BACKEND}")
    spec = KernelSpec("se", 0.5)
    for per_axis, n_picks in [(10, 50), (20, 100), (30, 200)]:
        grid = make_grid(2, per_axis)
        K = gram_matrix(spec, grid)
        t_py, _ = bench(py_greedy, K, 1.0, n_picks)
        line = (f"{grid.shape[0]:5d} arms, {n_picks:4d} picks | "
                f"python {t_py * 1e3:8.2f} ms")
        if HAVE_CYTHON:
            t_cy, _ = bench(cy_greedy, K, 1.0, n_picks)
            # picks can differ on exact symmetric ties (1-ulp accumulation
            # differences); the selected variance sequences must agree
            _, v_py = py_greedy(K, 1.0, n_picks)
            _, v_cy = cy_greedy(K, 1.0, n_picks)
            assert np.allclose(v_py, v_cy, atol=1e-9), "backend mismatch"
            line += f" | cython {t_cy * 1e3:8.2f} ms | speedup {t_py / t_cy:5.1f}x"
        else:
            line += " | cython extension not built"
        print(line)


if __name__ == "__main__":
    main()
