"""Runtime switches read from the environment.

``CIRCLEBIF_DISABLE_JIT=1`` routes every hot kernel through the vectorized
numpy backend instead of numba.  ``CIRCLEBIF_THREADS`` caps numba's thread
pool (the ``--threads`` CLI flag takes precedence).
"""
import os

_TRUE = {"1", "true", "yes", "on"}


def jit_disabled() -> bool:
    if os.environ.get("CIRCLEBIF_DISABLE_JIT", "").strip().lower() in _TRUE:
        return True
    try:
        import numba  # noqa: F401
    except ImportError:
        return True
    return False


def set_threads(n=None):
    """Apply a thread count to numba; returns the count actually in effect."""
    if n is None:
        env = os.environ.get("CIRCLEBIF_THREADS")
        n = int(env) if env else None
    if jit_disabled():
        return 1
    import numba

    if n is None:
        return numba.get_num_threads()
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
