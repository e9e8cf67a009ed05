"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``PATHPARSE_PURE_PYTHON=1``
to force the fallback. ``BACKEND`` names the active one.
"""
import os

from . import _pykernels

if os.environ.get("PATHPARSE_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND

neumaier_sum = _impl.neumaier_sum
phase_sums = _impl.phase_sums
block_sums = _impl.block_sums
direct_pair_sum = _impl.direct_pair_sum
scan_partitions = _impl.scan_partitions
anneal = _impl.anneal


def available_backends():
    """Name -> module for every backend importable in this environment."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
