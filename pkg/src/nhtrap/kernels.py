"""Backend selection for the flow kernel.

The compiled ``_flowcore`` extension is used when it imports cleanly and
``NHTRAP_PURE_PYTHON`` is not set; otherwise the pure-Python twin runs.
"""
import os

from . import _flow_py

BACKEND = "python"
_compiled = None

if os.environ.get("NHTRAP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _flowcore as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        BACKEND = "compiled"


def integrate_warped(params, y0, M0, t0, t1, rtol, atol, escape_radius,
                     store=True, backend=None):
    """Dispatch to the selected backend (or an explicitly requested one)."""
    use = backend or BACKEND
    if use == "compiled":
        if _compiled is None:
            raise ImportError("compiled flow kernel is not available")
        return _compiled.integrate_warped(params, y0, M0, t0, t1, rtol, atol,
                                          escape_radius, store)
    return _flow_py.integrate_warped(params, y0, M0, t0, t1, rtol, atol,
                                     escape_radius, store)


def compiled_available():
    return _compiled is not None
