"""Dense non-Hermitian eigensolver with independently recomputed residuals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from ..errors import PreconditionError, SolverError
from .operator import DeformedOperator

MAX_DENSE = 6000


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray
    residuals: np.ndarray

    def __iter__(self):
        return iter(zip(self.values, self.residuals))

    def __len__(self):
        return self.values.size


def _parity_blocks(d, u, l):
    """Reduced tridiagonal bands on the even and odd subspaces.

    For a reflection-symmetric tridiagonal matrix, ``u_i = +-u_{N-1-i}``
    decouples into two half-size problems.
    """
    N = d.size
    if N % 2:
        c = N // 2
        de = d[: c + 1].copy()
        ue = u[:c].copy()
        le = l[:c].copy()
        le[c - 1] = l[c - 1] + u[c]          # row c picks up its mirror neighbour
        do = d[:c].copy()
        uo = u[: c - 1].copy()
        lo = l[: c - 1].copy()
        return (de, ue, le), (do, uo, lo)
    c = N // 2
    de = d[:c].copy()
    do = d[:c].copy()
    de[c - 1] += u[c - 1]
    do[c - 1] -= u[c - 1]
    return (de, u[: c - 1].copy(), l[: c - 1].copy()), (do, u[: c - 1].copy(), l[: c - 1].copy())


def _expand(v, N, parity):
    """Full-grid vector from a half-grid parity vector."""
    out = np.zeros(N, dtype=complex)
    c = N // 2
    if N % 2:
        if parity == 0:
            out[: c + 1] = v
            out[c + 1:] = v[:c][::-1]
        else:
            out[:c] = v
            out[c + 1:] = -v[::-1]
    else:
        out[:c] = v
        out[c:] = (1.0 if parity == 0 else -1.0) * v[::-1]
    return out


def _tri_dense(d, u, l):
    return np.diag(d) + np.diag(u, 1) + np.diag(l, -1)


def _eigvals(A):
    try:
        return sla.eigvals(A, overwrite_a=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError("QR iteration did not converge",
                          diagnostics={"size": A.shape[0], "reason": str(exc)}) from exc


def inverse_iteration(d, u, l, lam, iters: int = 3, seed: int = 0):
    """Unit eigenvector of a tridiagonal matrix for the eigenvalue ``lam``."""
    N = d.size
    shift = lam + (abs(lam) + 1.0) * 1e-14
    dl, dd, du, du2, ipiv, info = lapack.zgttrf(l, d - shift, u)
    if info < 0:
        raise SolverError("tridiagonal factorisation failed", diagnostics={"info": info})
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    x /= np.linalg.norm(x)
    for _ in range(iters):
        x, info = lapack.zgttrs(dl, dd, du, du2, ipiv, x)[:2]
        nrm = np.linalg.norm(x)
        if not np.isfinite(nrm) or nrm == 0:
            break
        x /= nrm
    return x


def eigenpair_residual(op: DeformedOperator, lam: complex, parity=None) -> tuple:
    """``||A v - lam v||`` for the inverse-iteration eigenvector ``v``."""
    if parity is not None and op.even:
        blocks = _parity_blocks(op.diag, op.upper, op.lower)
        v = _expand(inverse_iteration(*blocks[parity], lam), op.size, parity)
        v /= np.linalg.norm(v)
    else:
        v = inverse_iteration(op.diag, op.upper, op.lower, lam)
    return float(np.linalg.norm(op.matvec(v) - lam * v)), v


def eigen_solve(op, residuals: bool = True) -> EigenResult:
    """All eigenvalues of the deformed operator (or a dense matrix).

    LAPACK's balanced Hessenberg/shifted-QR path does the factorisation.
    For reflection-symmetric line operators the even and odd subspaces are
    solved separately.  Residuals come from an inverse-iteration
    eigenvector and a direct matrix-vector product.
    """
    if isinstance(op, DeformedOperator):
        N = op.size
        if N > MAX_DENSE:
            raise PreconditionError(f"N={N} exceeds the dense limit {MAX_DENSE}")
        if op.even:
            parts = []
            pars = []
            for p, blk in enumerate(_parity_blocks(op.diag, op.upper, op.lower)):
                ev = _eigvals(_tri_dense(*blk))
                parts.append(ev)
                pars.append(np.full(ev.size, p))
            vals = np.concatenate(parts)
            parity = np.concatenate(pars)
        else:
            vals = _eigvals(op.matrix.copy())
            parity = None
        res = np.full(vals.size, np.nan)
        if residuals:
            for i, lam in enumerate(vals):
                res[i] = eigenpair_residual(op, lam, None if parity is None else int(parity[i]))[0]
        return EigenResult(vals, res)
    A = np.asarray(op)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError("matrix must be square")
    if A.shape[0] > MAX_DENSE:
        raise PreconditionError("matrix exceeds the dense limit")
    A = A.astype(complex)
    vals = _eigvals(A.copy())
    res = np.full(vals.size, np.nan)
    if residuals:
        ev, V = sla.eig(A)
        for i, lam in enumerate(vals):
            j = int(np.argmin(np.abs(ev - lam)))
            v = V[:, j] / np.linalg.norm(V[:, j])
            res[i] = float(np.linalg.norm(A @ v - lam * v))
    return EigenResult(vals, res)
