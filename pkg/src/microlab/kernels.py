"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``MICROLAB_PURE_PYTHON=1``
to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MICROLAB_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

lmf_fixed = _impl.lmf_fixed
lmf_general = _impl.lmf_general
markov_signs = _impl.markov_signs
linear_signs = _impl.linear_signs
gm_paths = _impl.gm_paths
mm_inventory = _impl.mm_inventory

__all__ = [
    "BACKEND",
    "lmf_fixed",
    "lmf_general",
    "markov_signs",
    "linear_signs",
    "gm_paths",
    "mm_inventory",
]
