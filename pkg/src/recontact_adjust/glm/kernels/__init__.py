"""Likelihood kernel backend selection.

The compiled extension is used when present; the NumPy reference
backend is the automatic fallback.  Setting the environment variable
``RECONTACT_ADJUST_PURE=1`` forces the reference backend, which is
useful for benchmarking and for debugging the extension itself.
"""

import os

from . import reference

if os.environ.get("RECONTACT_ADJUST_PURE", "").strip() not in ("", "0"):
    _impl = reference
    BACKEND = "reference"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = reference
        BACKEND = "reference"

logistic_core = _impl.logistic_core
solve_logistic = _impl.solve_logistic
nb_core = _impl.nb_core
zinb_core = _impl.zinb_core

__all__ = [
    "BACKEND",
    "logistic_core",
    "solve_logistic",
    "nb_core",
    "zinb_core",
    "reference",
]
