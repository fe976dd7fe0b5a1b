"""Backend selection for the hot kernels.

The compiled extension is used when available; the pure-numpy reference
lane is the fallback.  Both lanes are bit-identical by construction, so
selection never changes results.  Set STICKYMC_BACKEND=python to force
the fallback (used by the equivalence tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _ref

if os.environ.get("STICKYMC_BACKEND", "").lower() == "python":
    _impl = _ref
    HAVE_EXT = False
else:
    try:
        from . import _ext as _impl  # type: ignore[no-redef]

        HAVE_EXT = True
    except ImportError:
        _impl = _ref
        HAVE_EXT = False

BACKEND_NAME = "ext" if HAVE_EXT else "python"

evolve_kernel = _impl.evolve_kernel
two_point_batch = _impl.two_point_batch
