"""Kernel backend selection.

The compiled Cython kernels are preferred; the NumPy implementation is the
fallback. Selection happens once at import and can be forced with
BINPOP_KERNEL=cython|python (useful for benchmarking and CI).
"""

import os

from . import _kernels_py

_forced = os.environ.get("BINPOP_KERNEL", "").strip().lower()

if _forced == "python":
    _impl = _kernels_py
    BACKEND = "python"
elif _forced == "cython":
    from . import _kernels as _impl  # hard failure if forced but missing

    BACKEND = "cython"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

gamma_term_range = _impl.gamma_term_range
log_comb_range = _impl.log_comb_range
logbb_range = _impl.logbb_range
