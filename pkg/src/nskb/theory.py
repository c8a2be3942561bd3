"""Numeric calculators for the regret-rate statements.

Every rate is evaluated with unit constant (the theory's constants are
existence constants only).  Alongside the value, a flag reports whether V_T
falls inside the stated admissibility window for that rate; the window's
absolute constants default to 1 (and the SE polynomial-growth cap uses
exponent 1/2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from nskb.algorithms import MATERN_FAMILY, SE_FAMILY, mig_growth
from nskb.kernels import ConfigurationError

LOWER_BOUND = "lower_bound"
RPERP_UPPER = "rperp_upper"
UCB_UPPER = "ucb_upper"
OPKB_UPPER = "opkb_upper"
MIG_GROWTH = "mig_growth"

_KINDS = (LOWER_BOUND, RPERP_UPPER, UCB_UPPER, OPKB_UPPER, MIG_GROWTH)

# admissibility-window absolute constants (documented defaults)
_CBAR = 1.0
_CEXP = 0.5


@dataclass(frozen=True)
class RateQuery:
    family: str
    T: int
    V_T: float
    d: int
    nu: float | None = None
    which: str = LOWER_BOUND

    def __post_init__(self):
        if self.which not in _KINDS:
            raise ConfigurationError(f"unknown rate kind {self.which!r}")
        if self.family not in (SE_FAMILY, MATERN_FAMILY):
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.T < 3:
            raise ConfigurationError(f"T must be >= 3, got {self.T}")
        if not self.V_T > 0:
            raise ConfigurationError(f"V_T must be > 0, got {self.V_T}")
        if self.family == MATERN_FAMILY and (self.nu is None or not self.nu > 0.5):
            raise ConfigurationError("Matern rate queries need nu > 1/2")


def _vt_admissible(q: RateQuery) -> bool:
    """Whether V_T sits in the admissibility window of the lower-bound /
    upper-bound theorems (unit constants)."""
    T, V, lnT = q.T, q.V_T, math.log(q.T)
    if q.which in (LOWER_BOUND,):
        if q.family == SE_FAMILY:
            return (T ** -0.5 * lnT ** (q.d / 4) <= V < T * lnT ** (q.d / 4)
                    and V <= _CBAR * T ** _CEXP)
        nu = q.nu
        return (T ** (-nu / (2 * nu + q.d)) <= V
                <= 2 ** ((3 * nu + q.d) / (2 * nu + q.d)) * T)
    if q.which == RPERP_UPPER:
        if q.family == SE_FAMILY:
            return V >= T ** -0.5 * lnT ** ((q.d + 2) / 3)
        nu = q.nu
        return V >= T ** (-nu / (2 * nu + q.d)) * lnT ** ((nu + q.d) / (2 * nu + q.d))
    return True


def rate_value(q: RateQuery) -> tuple[float, bool]:
    """Numeric value of the selected rate (unit constant) plus the V_T
    admissibility flag."""
    T, V, d, nu = q.T, q.V_T, q.d, q.nu
    lnT = math.log(T)
    se = q.family == SE_FAMILY
    if q.which == MIG_GROWTH:
        return mig_growth(q.family, T, d, nu), True
    if q.which == LOWER_BOUND:
        if se:
            val = T ** (2 / 3) * V ** (1 / 3) * lnT ** (d / 6)
        else:
            val = T ** ((2 * nu + d) / (3 * nu + d)) * V ** (nu / (3 * nu + d))
    elif q.which == RPERP_UPPER:
        if se:
            val = T ** (2 / 3) * V ** (1 / 3)
        else:
            val = T ** ((2 * nu + d) / (3 * nu + d)) * V ** (nu / (3 * nu + d))
    elif q.which == UCB_UPPER:
        if se:
            val = T ** 0.75 * V ** 0.25
        else:
            val = T ** ((12 * nu + 13 * d) / (16 * nu + 8 * d)) * V ** 0.25
    else:  # OPKB_UPPER
        if se:
            val = T ** (2 / 3) * V ** (1 / 3)
        else:
            val = T ** ((4 * nu + 3 * d) / (6 * nu + 3 * d)) * V ** (1 / 3)
    return val, _vt_admissible(q)


def comparison_table(family: str, T: int, V_T: float, d: int,
                     nu: float | None = None) -> list[dict]:
    """Rows for the algorithm-comparison table at given (T, V_T, d, nu)."""
    rows = []
    for which, label in [(UCB_UPPER, "R/SW-GP-UCB upper"),
                         (OPKB_UPPER, "OPKB upper"),
                         (RPERP_UPPER, "R-PERP upper"),
                         (LOWER_BOUND, "lower bound"),
                         (MIG_GROWTH, "MIG growth")]:
        val, ok = rate_value(RateQuery(family, T, V_T, d, nu, which))
        rows.append({"rate": label, "which": which, "value": val,
                     "vt_admissible": ok})
    return rows
