"""Kernel backend selection.

The PLUGMETER_NUMBA environment variable picks the backend at import time:
"0" forces the pure-numpy path, "1" requires numba (import failure is then
an error), anything else (including unset) uses numba when importable and
falls back to numpy otherwise. Both backends are element-wise identical;
see kernels_numpy for the determinism argument.
"""

from __future__ import annotations

import os


def _pick():
    flag = os.environ.get("PLUGMETER_NUMBA", "").strip()
    if flag == "0":
        from plugmeter.analytics import kernels_numpy

        return kernels_numpy, "numpy"
    try:
        from plugmeter.analytics import kernels_numba

        return kernels_numba, "numba"
    except ImportError:
        if flag == "1":
            raise
        from plugmeter.analytics import kernels_numpy

        return kernels_numpy, "numpy"


_backend, _backend_name = _pick()

pair_contributions_ws = _backend.pair_contributions_ws
downsample_mask = _backend.downsample_mask


def active_backend() -> str:
    """Name of the kernel backend in use: 'numba' or 'numpy'."""
    return _backend_name
