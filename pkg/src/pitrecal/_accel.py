"""Select the compiled kernels when available, else the numpy fallback.

Set ``PITRECAL_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and the backend-equivalence tests).
"""

import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

KERNELS = ("ms_trajectory", "ms_ensemble", "mixture_cdf", "mixture_pdf",
           "mixture_quantile", "var_quadrature")

_compiled = None
if os.environ.get("PITRECAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _speedups as _compiled
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable; using numpy fallback")

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _fallback

ms_trajectory = _impl.ms_trajectory
ms_ensemble = _impl.ms_ensemble
mixture_cdf = _impl.mixture_cdf
mixture_pdf = _impl.mixture_pdf
mixture_quantile = _impl.mixture_quantile
# a single BLAS matvec pair beats the compiled double loop here
var_quadrature = _fallback.var_quadrature


def backends():
    """Map backend name to module for every backend importable here."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["compiled"] = _compiled
    else:
        try:
            from . import _speedups
            out["compiled"] = _speedups
        except ImportError:
            pass
    return out
