"""Hot loops behind a backend switch.

Both backends expose ``iterate_values`` and ``iterate_jets`` with identical
signatures.  numba is used unless ``CIRCLEBIF_DISABLE_JIT`` is set or numba
cannot be imported; :func:`get_backend` returns either module explicitly so
tests and benchmarks can compare them in one process.
"""
from .._config import jit_disabled


def get_backend(name=None):
    if name is None:
        name = "numpy" if jit_disabled() else "numba"
    if name == "numba":
        from . import _numba as mod
    elif name == "numpy":
        from . import _numpy as mod
    else:
        raise ValueError(f"unknown backend {name!r}")
    return mod


_impl = get_backend()
BACKEND = "numpy" if _impl.__name__.endswith("_numpy") else "numba"
iterate_values = _impl.iterate_values
iterate_jets = _impl.iterate_jets
