"""Backend selection for the greedy selection core.

Prefers the compiled Cython extension; falls back to pure NumPy.  Set
NSKB_PURE_PYTHON=1 to force the fallback (used by the benchmark and tests).
"""
import os

if os.environ.get("NSKB_PURE_PYTHON"):
    from nskb import _core_py as _impl
else:
    try:
        from nskb import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from nskb import _core_py as _impl

BACKEND = _impl.BACKEND
greedy_max_variance = _impl.greedy_max_variance
