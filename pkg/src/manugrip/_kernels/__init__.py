"""Hot numerical kernels, compiled when available.

The compiled ``_core`` extension is used if it imports; otherwise the numpy
implementations in ``_fallback`` are used. Set ``MANUGRIP_PURE_PYTHON=1`` to
force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("MANUGRIP_PURE_PYTHON"):
    try:
        from . import _core as _impl  # noqa: F811
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback

closest_point_triangle = _impl.closest_point_triangle
pairs_within = _impl.pairs_within
nearest_triangle = _impl.nearest_triangle
min_pair_sqdist = _impl.min_pair_sqdist
ray_crossings = _impl.ray_crossings
snh_batch = _impl.snh_batch

__all__ = [
    "BACKEND",
    "closest_point_triangle",
    "pairs_within",
    "nearest_triangle",
    "min_pair_sqdist",
    "ray_crossings",
    "snh_batch",
]
