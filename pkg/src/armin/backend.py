"""Kernel backend selection.

The compiled extension is preferred when it imports cleanly; the numpy
implementation is the fallback.  Set ``ARMIN_KERNELS=python`` or
``ARMIN_KERNELS=compiled`` before import to force a side.
"""

import os

from . import _kernels_py


def _load():
    choice = os.environ.get("ARMIN_KERNELS", "auto").strip().lower()
    if choice in ("py", "python", "numpy"):
        return _kernels_py
    try:
        from . import _ckernels
    except ImportError:
        if choice in ("c", "compiled", "ext"):
            raise ImportError(
                "ARMIN_KERNELS requested the compiled backend but the "
                "armin._ckernels extension is not built"
            )
        return _kernels_py
    return _ckernels


kernels = _load()


def backend_name() -> str:
    return kernels.NAME


def available_backends() -> dict:
    """Importable kernel backends by name, regardless of the selection."""
    found = {"python": _kernels_py}
    try:
        from . import _ckernels

        found["compiled"] = _ckernels
    except ImportError:
        pass
    return found
