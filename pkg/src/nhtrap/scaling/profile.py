"""Complex-scaling deformation profiles ``f_{theta,R}``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError

PROFILE_DESCRIPTION = (
    "f(r) = sign(r) |r| tan(theta) s(t), t = clip((|r|-R)/R, 0, 1), "
    "s(t) = 6t^5 - 15t^4 + 10t^3 (quintic smoothstep)"
)


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def _smoothstep_derivs(t):
    t = np.clip(t, 0.0, 1.0)
    s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    ds = 30.0 * t * t * (1.0 - t) ** 2
    d2s = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    return s, ds, d2s


def profile_values(r, theta: float, R: float):
    """``(f, f', f'')`` at the abscissae ``r`` (odd extension for ``r < 0``).

    ``f = |r| tan(theta) s(t)`` vanishes with ``f'`` for ``|r| <= R`` and
    equals ``|r| tan(theta)`` for ``|r| >= 2R``.
    """
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    sgn = np.where(r < 0, -1.0, 1.0)
    tt = np.tan(theta)
    s, ds, d2s = _smoothstep_derivs((a - R) / R)
    f = sgn * tt * a * s
    fp = tt * (s + (a / R) * ds)
    fpp = sgn * tt * ((2.0 / R) * ds + (a / (R * R)) * d2s)
    return f, fp, fpp


@dataclass(frozen=True)
class ScalingProfile:
    theta: float
    R: float
    grid: np.ndarray
    f: np.ndarray
    f_prime: np.ndarray
    f_double_prime: np.ndarray
    grid_max: float
    line: bool

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def evaluate(self, r):
        return profile_values(r, self.theta, self.R)

    @property
    def contour(self) -> np.ndarray:
        return self.grid + 1j * self.f


def build_profile(theta: float, R: float, grid_max: float, N: int, line: bool = True,
                  allow_zero_theta: bool = False) -> ScalingProfile:
    """Sample the profile on ``N`` interior nodes of ``[-grid_max, grid_max]``.

    The endpoints carry the Dirichlet condition and are not part of the grid;
    ``line=False`` uses ``(0, grid_max)`` for radial problems.
    """
    ok = (0.0 <= theta if allow_zero_theta else 0.0 < theta) and theta < np.pi / 2
    if not ok:
        raise DomainError("theta must lie in (0, pi/2)")
    if not R > 0:
        raise DomainError("R must be positive")
    if grid_max < 3 * R:
        raise DomainError("grid_max must be at least 3R")
    if N < 200:
        raise DomainError("N must be at least 200")
    if line:
        dr = 2.0 * grid_max / (N + 1)
        grid = -grid_max + dr * np.arange(1, N + 1)
        # exact symmetry of the node set about 0
        grid = 0.5 * (grid - grid[::-1])
    else:
        dr = grid_max / (N + 1)
        grid = dr * np.arange(1, N + 1)
    f, fp, fpp = profile_values(grid, theta, R)
    for arr in (grid, f, fp, fpp):
        arr.setflags(write=False)
    return ScalingProfile(float(theta), float(R), grid, f, fp, fpp, float(grid_max), bool(line))
