"""Kernel backend selection.

The compiled extension is used when it imports; set ``SLICEBENCH_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

from . import _pykernels

if os.environ.get("SLICEBENCH_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND
hash_key = _impl.hash_key
hash_keys = _impl.hash_keys
mix64 = _impl.mix64
yates = _impl.yates
simulate_batch = _impl.simulate_batch


def available_backends():
    """Return ``{name: module}`` for every importable backend."""
    backends = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        backends["cython"] = _ckernels
    return backends
