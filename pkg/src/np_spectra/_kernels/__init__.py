"""Dense assembly kernels with a compiled core and a NumPy fallback.

The Cython extension (np_spectra._kernels._core) is used when it imported
cleanly and NP_SPECTRA_FORCE_FALLBACK is unset; otherwise the pure-NumPy
reference implementations take over.  Both expose the same signatures.
"""

import os

from . import fallback

_names = (
    "np_kernel_matrix",
    "log_remainder_matrix",
    "first_variation_matrix",
    "cross_block_matrices",
    "cross_log_matrix",
    "segment_intersections",
)

if os.environ.get("NP_SPECTRA_FORCE_FALLBACK", "0") == "1":
    _impl = fallback
    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = fallback
        BACKEND = "fallback"

np_kernel_matrix = _impl.np_kernel_matrix
log_remainder_matrix = _impl.log_remainder_matrix
first_variation_matrix = _impl.first_variation_matrix
cross_block_matrices = _impl.cross_block_matrices
cross_log_matrix = _impl.cross_log_matrix
segment_intersections = _impl.segment_intersections

__all__ = list(_names) + ["BACKEND", "fallback"]
