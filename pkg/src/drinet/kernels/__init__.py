"""Kernel backend selection: compiled Cython core with a NumPy fallback.

Set DRINET_FORCE_PYTHON_KERNELS=1 to force the fallback (used by the
benchmark to compare both backends).
"""
import os

from . import _pykern

if os.environ.get("DRINET_FORCE_PYTHON_KERNELS"):
    _backend = _pykern
else:
    try:
        from . import _ckern as _backend
    except ImportError:
        _backend = _pykern

BACKEND = _backend.NAME

segment_sum = _backend.segment_sum
segment_mean = _backend.segment_mean
segment_max = _backend.segment_max
gather_rows = _backend.gather_rows
scatter_add_rows = _backend.scatter_add_rows


def available_backends():
    """Names of importable backends (for the kernel benchmark)."""
    names = {"numpy": _pykern}
    try:
        from . import _ckern
        names["cython"] = _ckern
    except ImportError:
        pass
    return names
