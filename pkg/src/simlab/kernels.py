"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
``SIMLAB_BACKEND=python`` forces the fallback, ``SIMLAB_BACKEND=cython``
makes a missing extension an import error.  ``SIMLAB_NUM_THREADS`` sets the
default OpenMP thread count (results do not depend on it).
"""

import os

from . import _pykernels

_choice = os.environ.get("SIMLAB_BACKEND", "auto").lower()
if _choice not in {"auto", "cython", "python"}:
    raise ImportError(f"SIMLAB_BACKEND must be auto, cython or python, not {_choice!r}")

if _choice == "python":
    backend = _pykernels
else:
    try:
        from . import _kernels as backend
    except ImportError:
        if _choice == "cython":
            raise
        backend = _pykernels

_num_threads = max(1, int(os.environ.get("SIMLAB_NUM_THREADS", "1")))


def set_num_threads(n: int) -> None:
    global _num_threads
    _num_threads = max(1, int(n))


def get_num_threads() -> int:
    return _num_threads


def backend_name() -> str:
    return backend.BACKEND


def _pick(module):
    return module if module is not None else backend


def tridiag_lines(lower, diag, upper, rhs, out, module=None):
    return _pick(module).tridiag_lines(lower, diag, upper, rhs, out, _num_threads)


def circulant_rings(u, g, kmax, out, module=None):
    return _pick(module).circulant_rings(u, g, kmax, out, _num_threads)


def sturm_counts(diag, off2, shifts, pivmin, module=None):
    return _pick(module).sturm_counts(diag, off2, shifts, pivmin)


def available_backends():
    mods = {"python": _pykernels}
    try:
        from . import _kernels
        mods["cython"] = _kernels
    except ImportError:
        pass
    return mods
