"""Resolvent norms via inverse subspace iteration on ``B^H B``."""
from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from ..errors import NormUncertainError, PreconditionError
from .operator import DeformedOperator

BLOCK = 4


def smallest_singular_value(d, u, l, rtol: float = 1e-6, maxiter: int = 300, seed: int = 0):
    """``sigma_min`` of a tridiagonal matrix by block inverse iteration.

    Iterates ``X <- B^{-1} B^{-H} X`` with Rayleigh-Ritz on the block; the
    largest Ritz value of ``(B^H B)^{-1}`` converges to ``sigma_min^{-2}``.
    """
    N = d.size
    dl, dd, du, du2, ipiv, info = lapack.zgttrf(l, d, u)
    if info > 0:
        return 0.0, None
    k = min(BLOCK, N)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, k)) + 1j * rng.standard_normal((N, k))
    X, _ = np.linalg.qr(X)
    prev = None
    hist = []
    for it in range(maxiter):
        W, info = lapack.zgttrs(dl, dd, du, du2, ipiv, X, trans="C")[:2]
        G = W.conj().T @ W
        evals, evecs = np.linalg.eigh(G)
        top = float(evals[-1])
        if not np.isfinite(top) or top <= 0:
            return 0.0, None
        est = 1.0 / np.sqrt(top)
        hist.append(est)
        if prev is not None and abs(est - prev) <= 0.1 * rtol * est:
            return est, X @ evecs[:, -1]
        prev = est
        Y, info = lapack.zgttrs(dl, dd, du, du2, ipiv, W)[:2]
        Y = Y @ evecs[:, ::-1]
        X, _ = np.linalg.qr(Y)
    raise NormUncertainError("inverse iteration for sigma_min stagnated",
                             last_iterate={"estimates": hist[-5:], "vector": X[:, 0]})


def resolvent_norm(op: DeformedOperator, omega: complex, rtol: float = 1e-6) -> float:
    """``||(A - omega^2)^{-1}||_2 = 1 / sigma_min(A - omega^2)`` in the discrete l2 norm."""
    E = complex(omega) ** 2
    d = op.diag - E
    sigma, _ = smallest_singular_value(d, op.upper, op.lower, rtol)
    if sigma == 0.0:
        raise PreconditionError("omega^2 is an eigenvalue to working precision")
    return 1.0 / sigma


def stack_resolvent_norm(ops, omega: complex, rtol: float = 1e-6) -> float:
    """Norm of a block-diagonal (separated) resolvent: the maximum over blocks."""
    return max(resolvent_norm(op, omega, rtol) for op in ops)
