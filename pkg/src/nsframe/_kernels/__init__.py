"""Hot kernels with a compiled core and a numpy fallback.

The Cython extension ``_ckernels`` is used when it imports; otherwise (or
when ``NSFRAME_PURE_PYTHON=1``) the numpy versions in ``_fallback`` are
used.  ``BACKEND`` names the active one.
"""

import os

from . import _fallback
from ._fallback import GAUSSIAN, HANN, INDICATOR, RCBAND, conv_simpson

_compiled = None
if os.environ.get("NSFRAME_PURE_PYTHON", "").lower() not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

_impl = _compiled if _compiled is not None else _fallback
BACKEND = "cython" if _compiled is not None else "python"

leaf_eval = _fallback.leaf_eval
conv_simpson_leaves = _impl.conv_simpson_leaves
shifted_product_sums = _impl.shifted_product_sums
walnut_apply = _impl.walnut_apply


def backends():
    """Available kernel modules keyed by name (for tests and benchmarks)."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


__all__ = [
    "BACKEND",
    "GAUSSIAN",
    "HANN",
    "INDICATOR",
    "RCBAND",
    "backends",
    "conv_simpson",
    "conv_simpson_leaves",
    "leaf_eval",
    "shifted_product_sums",
    "walnut_apply",
]
