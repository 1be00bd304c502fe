"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``ERGOLAB_PURE_PYTHON=1``
to force the numpy fallback.  ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

_force_py = os.environ.get("ERGOLAB_PURE_PYTHON", "").strip() not in ("", "0")

if _force_py:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

stream_key = _impl.stream_key
uniforms = _impl.uniforms
iterate_1d = _impl.iterate_1d
iterate_viana = _impl.iterate_viana
interval_overlaps = _impl.interval_overlaps

FAM_PL = _kernels_py.FAM_PL
FAM_INTERMITTENT = _kernels_py.FAM_INTERMITTENT
FAM_QUADRATIC = _kernels_py.FAM_QUADRATIC

# named random streams, hashed into the key together with the master seed
STREAM_INIT = 1
STREAM_DITHER = 2
STREAM_PAIRS = 3
STREAM_TRIALS = 4


def backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
        out["cython"] = _kernels
    except ImportError:
        pass
    return out
