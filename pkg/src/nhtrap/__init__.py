"""Resonances, expansion rates and band counts near normally hyperbolic trapping.

Subpackages: ``dynamics`` (flows, trapping, rates, transport) and ``scaling``
(complex scaling and resonances).  Modules: ``warped`` (the warped-product
models), ``model`` (the exactly solvable model case), ``weyl`` (band census
and gap scans), ``experiments``/``cli`` (the command line harness).
"""
__version__ = "0.1.0"

from .errors import NHTrapError  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "NHTrapError", "__version__"]
