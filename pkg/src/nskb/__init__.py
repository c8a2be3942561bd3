"""Non-stationary kernelized bandit simulation library.

Implements restarting phased elimination with random permutation (R-PERP),
restart / sliding-window GP-UCB and random baselines, drifting RKHS reward
environments over finite grids, and the rate calculators that accompany them.
"""
from nskb.kernels import KernelSpec, gram_matrix, kernel_eval

__all__ = ["KernelSpec", "kernel_eval", "gram_matrix"]
__version__ = "0.1.0"
