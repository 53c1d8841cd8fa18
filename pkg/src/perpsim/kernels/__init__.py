"""Kernel backend selection.

The hot recursions exist twice: a compiled Cython extension and a pure
numpy fallback.  The compiled backend is preferred when importable; set
``PERPSIM_KERNELS=numpy`` or ``PERPSIM_KERNELS=compiled`` to force one.

The draw-matrix kernels (``paths``, ``log_paths``, ``advance``,
``dual_max``, ``associated``) perform the identical per-path operation
sequence in both backends, so their outputs agree to rounding on the same
draws.  ``collect_cycles`` consumes the random stream in a backend-specific
order and is only statistically equivalent across backends.
"""

import os

from . import numpy_backend

_forced = os.environ.get("PERPSIM_KERNELS", "auto").lower()

_impl = None
if _forced in ("auto", "compiled"):
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _forced == "compiled":
            raise ImportError(
                "PERPSIM_KERNELS=compiled but the extension is not built; "
                "run `pip install -e . --no-build-isolation`"
            )
if _impl is None:
    _impl = numpy_backend

BACKEND = _impl.NAME

paths = _impl.paths
log_paths = _impl.log_paths
advance = _impl.advance
dual_max = _impl.dual_max
associated = _impl.associated
collect_cycles = _impl.collect_cycles


def get_backend(name: str):
    """Explicit backend module by name, for benchmarking and tests."""
    if name == "numpy":
        return numpy_backend
    if name == "compiled":
        from . import _speedups
        return _speedups
    raise ValueError(f"unknown kernel backend {name!r}")
