"""Kernel backend selection.

The compiled extension is preferred when it built; set VSOFTPRO_PURE_PY=1
to force the pure-Python fallback (used by the backend-equivalence tests
and the benchmark).
"""

import os

if os.environ.get("VSOFTPRO_PURE_PY"):
    from . import _py as impl
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _py as impl

BACKEND = impl.BACKEND
elbow_rk4 = impl.elbow_rk4
