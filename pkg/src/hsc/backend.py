"""Selects the kernel backend at import time.

The environment variable ``HSC_NUMBA`` picks the implementation of the hot
kernels (2-D convolution forward/backward and the error-function core):

* unset or ``1`` — use the numba-compiled kernels when numba imports;
* ``0`` — force the pure-numpy fallback.

Both backends are deterministic run-to-run; convolution results agree across
backends to rounding (~1e-14 relative), not bitwise. A bitstream must be
decoded under the same backend that encoded it, because the entropy
parameters feeding the range coder are recomputed at decode time.
"""

import os

from . import _kernels_numpy

_flag = os.environ.get("HSC_NUMBA", "1").strip().lower()

if _flag in ("0", "false", "no", "off"):
    _impl = _kernels_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl
        BACKEND = "numba"
    except ImportError:
        _impl = _kernels_numpy
        BACKEND = "numpy"

erfc = _impl.erfc
conv2d_fwd = _impl.conv2d_fwd
conv2d_grad_input = _impl.conv2d_grad_input
conv2d_grad_weight = _impl.conv2d_grad_weight


def backend_name():
    """Name of the active kernel backend, "numba" or "numpy"."""
    return BACKEND


def implementations():
    """All importable kernel modules, keyed by name (for benchmarks)."""
    impls = {"numpy": _kernels_numpy}
    try:
        from . import _kernels_numba
        impls["numba"] = _kernels_numba
    except ImportError:
        pass
    return impls
