"""Hot pixel kernels with a compiled core and a NumPy fallback.

The compiled extension (``shapeseg.kernels._core``, built from Cython) is
preferred when importable; otherwise the NumPy fallback is used. Both produce
bit-identical output. Set ``SHAPESEG_KERNELS=fallback`` to force the fallback,
e.g. for benchmarking.
"""

import os

from . import fallback as _fallback

if os.environ.get("SHAPESEG_KERNELS", "").lower() == "fallback":
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"

correlate1d_replicate = _impl.correlate1d_replicate
correlate2d_replicate = _impl.correlate2d_replicate
clahe_apply = _impl.clahe_apply

__all__ = [
    "BACKEND",
    "correlate1d_replicate",
    "correlate2d_replicate",
    "clahe_apply",
]
