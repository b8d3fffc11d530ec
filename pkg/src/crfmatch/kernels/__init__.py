"""Hot kernel selection.

The compiled numba kernels are used by default.  Set CRFMATCH_PURE_NUMPY=1
(or run where numba is not installed) to select the pure NumPy reference
implementations instead; both backends produce identical results.
"""

import os

_flag = os.environ.get("CRFMATCH_PURE_NUMPY", "0").strip().lower()
_want_numba = _flag not in ("1", "true", "yes")

if _want_numba:
    try:
        from . import _numba as _impl

        HAS_NUMBA = True
    except ImportError:
        from . import _numpy as _impl

        HAS_NUMBA = False
else:
    from . import _numpy as _impl

    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"

project_onto_segments = _impl.project_onto_segments
dijkstra_nodes = _impl.dijkstra_nodes
viterbi_decode = _impl.viterbi_decode
forward_log_partition = _impl.forward_log_partition
crf_expectations = _impl.crf_expectations

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "project_onto_segments",
    "dijkstra_nodes",
    "viterbi_decode",
    "forward_log_partition",
    "crf_expectations",
]
