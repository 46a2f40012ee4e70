"""Backend selection for the sample-rate loops.

The compiled extension is used when it was built; otherwise, or when
``SASFANC_PURE_PYTHON=1`` is set, the numpy implementation is used.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SASFANC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

fxnlms_loop = _impl.fxnlms_loop
# block convolution in numpy beats the compiled scalar loop for a fixed filter
fir_loop = _kernels_py.fir_loop
saf_loop = _impl.saf_loop


def get_backend(name):
    """Module implementing the loops for ``name`` in {"python", "cython"}."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
