"""Selection between numba-compiled kernels and the pure-numpy fallback.

The backend is fixed at import time from the ``TOPOLIG_BACKEND`` environment
variable (``numba`` or ``numpy``). ``TOPOLIG_DISABLE_NUMBA=1`` is accepted as a
shorthand for ``numpy``. When numba is not importable the numpy path is used
regardless of the flag.
"""
import logging
import os

logger = logging.getLogger("topolig")

try:
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
        # skip probing an outdated TBB (it only warns); openmp or workqueue are fine
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range


def _requested_backend():
    if os.environ.get("TOPOLIG_DISABLE_NUMBA", "") not in ("", "0"):
        return "numpy"
    name = os.environ.get("TOPOLIG_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"TOPOLIG_BACKEND must be 'numba' or 'numpy', got {name!r}")
    return name


BACKEND = _requested_backend()
if BACKEND == "numba" and not HAS_NUMBA:  # pragma: no cover
    logger.warning("numba unavailable, falling back to numpy kernels")
    BACKEND = "numpy"

USE_NUMBA = BACKEND == "numba"


def set_threads(n):
    """Set the worker count for parallel numba kernels (no-op for numpy)."""
    if HAS_NUMBA and n is not None and n > 0:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


def configure_logging():
    level = os.environ.get("LIGAMENT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
