"""Finite-difference discretisation of the complex-scaled operator."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from ..errors import DomainError, PreconditionError
from .profile import ScalingProfile, profile_values

SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class DeformedOperator:
    """Tridiagonal matrix of the deformed operator on the profile's nodes.

    ``lower[i] = A[i+1, i]``, ``upper[i] = A[i, i+1]``.  The dense
    ``matrix`` is built on first access.
    """

    diag: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    profile: ScalingProfile
    h: float
    angular_coefficient: float
    potential: np.ndarray
    dimension_n: int
    even: bool

    @property
    def grid(self) -> np.ndarray:
        return self.profile.grid

    @property
    def theta(self) -> float:
        return self.profile.theta

    @property
    def size(self) -> int:
        return self.diag.size

    @cached_property
    def matrix(self) -> np.ndarray:
        A = np.diag(self.diag)
        A += np.diag(self.upper, 1)
        A += np.diag(self.lower, -1)
        return A

    @cached_property
    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.diag) ** 2) + np.sum(np.abs(self.upper) ** 2)
                             + np.sum(np.abs(self.lower) ** 2)))

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[:-1] += self.upper * u[1:]
        out[1:] += self.lower * u[:-1]
        return out


def assemble_deformed(profile: ScalingProfile, potential: Callable, h: float,
                      angular_coefficient: float = 0.0, dimension_n: int = 1,
                      continuation: bool = False) -> DeformedOperator:
    """Assemble ``((1+if')^{-1} hD_r)^2 + V`` (plus radial terms) on the nodes.

    The second-order part is the composition of two first-order difference
    quotients: a forward quotient divided by ``1+if'`` at the half node, then
    a backward quotient divided by ``1+if'`` at the node.  Boundary values
    are zero and eliminated.

    With ``continuation=True`` the potential must accept complex arguments
    and is evaluated on the deformed contour ``r + i f(r)``; otherwise it is
    evaluated on the real nodes and must vanish (below 1e-14) for ``|r| >= R``.

    For radial problems (``profile.line`` false) the first-order term
    ``-(n-1) h^2 / ((r+if)(1+if')) d_r`` and the angular term
    ``angular_coefficient h^2 / (r+if)^2`` are added.
    """
    if not h > 0:
        raise DomainError("h must be positive")
    if angular_coefficient < 0:
        raise DomainError("angular_coefficient must be non-negative")
    if profile.line and angular_coefficient != 0.0:
        raise DomainError("line problems take the angular term inside the potential")
    r = profile.grid
    dr = profile.spacing
    N = r.size
    z = r + 1j * profile.f
    w = 1.0 + 1j * profile.f_prime
    half = np.concatenate(([r[0] - dr], r)) + 0.5 * dr
    _, fpm, _ = profile_values(half, profile.theta, profile.R)
    wm = 1.0 + 1j * fpm
    if continuation:
        V = np.asarray(potential(z), dtype=complex) * np.ones(N)
    else:
        V = np.asarray(potential(r), dtype=float) * np.ones(N)
        outside = np.abs(r) >= profile.R
        if np.any(outside) and np.max(np.abs(V[outside])) > SUPPORT_TOL:
            raise PreconditionError("potential is not supported inside |r| < R")
    c = h * h / (dr * dr)
    diag = c / w * (1.0 / wm[1:] + 1.0 / wm[:-1]) + V
    upper = -c / (w[:-1] * wm[1:-1])
    lower = -c / (w[1:] * wm[1:-1])
    if not profile.line:
        if dimension_n > 1:
            k = (dimension_n - 1) * h * h / (z * w * 2.0 * dr)
            upper = upper - k[:-1]
            lower = lower + k[1:]
        if angular_coefficient:
            diag = diag + angular_coefficient * h * h / (z * z)
    if profile.theta == 0.0:
        diag, upper, lower = diag.real + 0j, upper.real + 0j, lower.real + 0j
    even = False
    if profile.line:
        scale = max(1.0, float(np.max(np.abs(diag))))
        even = bool(np.max(np.abs(diag - diag[::-1])) <= 1e-13 * scale
                    and np.max(np.abs(upper - lower[::-1])) <= 1e-13 * scale)
    for arr in (diag, upper, lower, V):
        arr.setflags(write=False)
    return DeformedOperator(diag, upper, lower, profile, float(h), float(angular_coefficient),
                            V, int(dimension_n), even)
