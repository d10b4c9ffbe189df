"""Backend selection for the row-range kernels.

The compiled Cython extension is used when it imports; otherwise, or when
``POWERBLOCK_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
numpy fallback is used.  Both backends produce bitwise identical results.
"""
import os

from . import _pykernels

KERNEL_NAMES = (
    "spmv",
    "spmv_scaled",
    "spmv_split",
    "residual_split",
    "tri_inner",
    "jacobi_sweep",
    "cheb_step",
)


def _load_compiled():
    if os.environ.get("POWERBLOCK_PURE_PYTHON", "") not in ("", "0"):
        return None
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()
BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _pykernels

spmv = _impl.spmv
spmv_scaled = _impl.spmv_scaled
spmv_split = _impl.spmv_split
residual_split = _impl.residual_split
tri_inner = _impl.tri_inner
jacobi_sweep = _impl.jacobi_sweep
cheb_step = _impl.cheb_step


def backends():
    """Return ``{name: module}`` for every importable backend."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
