"""Kernel backend selection.

The compiled Cython kernels are preferred; the pure-Python module is the
fallback when the extension is missing or when STACKGEN_PURE_PYTHON=1 is
set. Both implement the same contract, and tree construction is
bitwise-identical across backends (see _pykernels for the guarantees).
"""

import os

from . import _pykernels

if os.environ.get("STACKGEN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

CRITERION_VARIANCE = _pykernels.CRITERION_VARIANCE
CRITERION_GINI = _pykernels.CRITERION_GINI

build_tree = _impl.build_tree
predict_tree = _impl.predict_tree
enet_cd = _impl.enet_cd


def backend_name() -> str:
    """Name of the active kernel backend ('compiled' or 'python')."""
    return _impl.BACKEND


def get_backend(name: str):
    """Return a specific backend module ('compiled' or 'python').

    Used by the backend benchmark and the cross-backend equivalence tests;
    raises ImportError if the compiled backend was not built.
    """
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
