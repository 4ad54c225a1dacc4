"""Backend selection for the coalition-game kernel.

The compiled extension is used when importable; set ``FEDALLOC_PURE_PYTHON=1``
to force the fallback. Both produce identical results for identical inputs.
"""

import os

from . import _coalition_py

BACKENDS = {"python": _coalition_py}
try:
    from . import _coalition
    BACKENDS["cython"] = _coalition
except ImportError:
    pass

if os.environ.get("FEDALLOC_PURE_PYTHON", "") not in ("", "0") or "cython" not in BACKENDS:
    BACKEND = "python"
else:
    BACKEND = "cython"

coalition_sweeps = BACKENDS[BACKEND].coalition_sweeps
t_comp_owner = BACKENDS[BACKEND].t_comp_owner
