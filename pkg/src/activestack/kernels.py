"""Hot inner loops: an interior-point solver for the linear SVR dual and Lloyd iterations for k-means.

The compiled extension is used when it imports; otherwise the numpy
implementation runs. Set ``ACTIVESTACK_PURE=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("ACTIVESTACK_PURE") != "1":
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

svr_ipm = _impl.svr_ipm
lloyd = _impl.lloyd
