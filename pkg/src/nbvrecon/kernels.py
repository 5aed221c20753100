"""Hot-loop kernels: compiled core when available, numpy fallback otherwise.

Set ``NBVRECON_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
segments_clear = _pykernels.segments_clear

if not os.environ.get("NBVRECON_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        segments_clear = _ckernels.segments_clear
        BACKEND = "cython"

__all__ = ["BACKEND", "segments_clear"]
