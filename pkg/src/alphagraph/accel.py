"""Optional numba acceleration for the hot training kernels.

The CBOW and co-occurrence-factorization inner loops are the only parts of
the package that iterate element-by-element in Python; everything else is
vectorized numpy. Those kernels are written once as plain functions and
compiled with ``numba.njit`` when available. Setting ``ALPHAGRAPH_NUMBA=0``
in the environment selects the interpreted fallback, which runs the exact
same code (and therefore produces identical results, just slower).

``benchmarks/bench_kernels.py`` times both paths side by side.
"""

import os

_FLAG = os.environ.get("ALPHAGRAPH_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _FLAG not in ("0", "false", "no", "off")

try:
    from numba import njit as _njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    _njit = None
    NUMBA_AVAILABLE = False

NUMBA_ENABLED = NUMBA_REQUESTED and NUMBA_AVAILABLE


def maybe_njit(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(fn)
    return fn


def force_njit(fn):
    """Compile ``fn`` with numba regardless of the env flag (benchmark use)."""
    if not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    return _njit(cache=True)(fn)


# Park-Miller multiplicative congruential generator. Chosen because the
# recurrence stays inside int64 during the multiply, so the same source code
# yields bit-identical streams under numba (int64) and CPython (unbounded int).
MINSTD_M = 2147483647
MINSTD_A = 48271


def seed_to_state(seed):
    """Map an arbitrary integer seed onto a valid Park-Miller state."""
    return (int(seed) % (MINSTD_M - 1)) + 1
