"""Phase-space points, Hamiltonian systems and flow records."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import DomainError, PreconditionError

TRAPPED_FORWARD = "trapped_forward"
TRAPPED_BACKWARD = "trapped_backward"
TRAPPED_BOTH = "trapped_both"
ESCAPED = "escaped"
CLASSIFICATIONS = (TRAPPED_FORWARD, TRAPPED_BACKWARD, TRAPPED_BOTH, ESCAPED)


@dataclass(frozen=True)
class PhasePoint:
    """A point ``(x, xi)`` of the cotangent bundle ``T*R^m``."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float)).copy()
        if x.shape != xi.shape or x.ndim != 1:
            raise DomainError("position and momentum must be 1-d of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
            raise DomainError("phase point has non-finite entries")
        x.setflags(write=False)
        xi.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @property
    def dim(self) -> int:
        return self.x.size

    def vector(self) -> np.ndarray:
        return np.concatenate((self.x, self.xi))

    @classmethod
    def from_vector(cls, z) -> "PhasePoint":
        z = np.asarray(z, dtype=float)
        m = z.size // 2
        return cls(z[:m], z[m:])

    def __eq__(self, other):
        if not isinstance(other, PhasePoint):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.xi, other.xi)

    def __hash__(self):
        return hash((self.x.tobytes(), self.xi.tobytes()))


def _as_vector(point) -> np.ndarray:
    if isinstance(point, PhasePoint):
        return point.vector()
    return np.asarray(point, dtype=float)


@dataclass(frozen=True)
class HamiltonianSystem:
    """A symbol ``p`` on ``T*R^m`` with derivatives and an escape region.

    The callbacks take the stacked vector ``z = (x, xi)`` of length ``2m``;
    use :meth:`value` to evaluate on a :class:`PhasePoint`.

    ``exit_coordinate(z)`` returns a signed scalar whose magnitude is compared
    with the escape radii and whose sign names the exit side.  By default it
    is ``|x|`` signed by ``x[0]``.  ``native`` optionally carries parameters
    for the compiled warped-product kernel.
    """

    dim: int
    p: Callable[[np.ndarray], float]
    grad_p: Callable[[np.ndarray], np.ndarray]
    hess_p: Callable[[np.ndarray], np.ndarray]
    escape_radius_inner: float
    escape_radius_outer: float
    energy_band: tuple = (0.5, 1.5)
    exit_coordinate: Optional[Callable[[np.ndarray], float]] = None
    native: Optional[tuple] = None
    name: str = "system"

    def __post_init__(self):
        if self.dim < 1:
            raise PreconditionError("dim must be positive")
        if not self.escape_radius_inner < self.escape_radius_outer:
            raise PreconditionError("escape_radius_inner must be below escape_radius_outer")
        b0, b1 = self.energy_band
        if not 0 < b0 < b1:
            raise PreconditionError("energy band must satisfy 0 < b0 < b1")

    def value(self, point) -> float:
        return float(self.p(_as_vector(point)))

    def signed_exit(self, z) -> float:
        if self.exit_coordinate is not None:
            return float(self.exit_coordinate(z))
        x = z[: self.dim]
        r = float(np.linalg.norm(x))
        return r if x[0] >= 0 else -r

    def hamilton_field(self, z) -> np.ndarray:
        g = self.grad_p(z)
        m = self.dim
        return np.concatenate((g[m:], -g[:m]))

    def self_test(self, points: Sequence, rel_tol: float = 1e-6, step: float = 1e-6) -> float:
        """Check ``grad_p`` against centered differences of ``p``.

        Returns the worst relative discrepancy; raises PreconditionError if
        it exceeds ``rel_tol``.
        """
        worst = 0.0
        for pt in points:
            z = _as_vector(pt)
            g = np.asarray(self.grad_p(z), dtype=float)
            fd = np.empty_like(g)
            for i in range(z.size):
                e = np.zeros_like(z)
                e[i] = step
                fd[i] = (self.p(z + e) - self.p(z - e)) / (2 * step)
            scale = max(1.0, float(np.max(np.abs(g))))
            worst = max(worst, float(np.max(np.abs(g - fd))) / scale)
        if worst > rel_tol:
            raise PreconditionError(f"grad_p inconsistent with p (rel err {worst:.2e})")
        return worst


@dataclass(frozen=True)
class FlowResult:
    """Samples of ``exp(tH_p)`` and, optionally, of its differential."""

    times: np.ndarray
    states: np.ndarray
    monodromy: Optional[np.ndarray]
    escaped: bool
    escape_time: Optional[float]

    @property
    def points(self):
        return [(float(t), PhasePoint.from_vector(z)) for t, z in zip(self.times, self.states)]

    @property
    def final(self) -> PhasePoint:
        return PhasePoint.from_vector(self.states[-1])


@dataclass(frozen=True)
class TrappedSample:
    point: PhasePoint
    classification: str
    horizon: float
    forward_trapped: bool = field(default=False)
    backward_trapped: bool = field(default=False)

    def __post_init__(self):
        if self.classification not in CLASSIFICATIONS:
            raise DomainError(f"unknown classification {self.classification!r}")
        if self.classification == TRAPPED_BOTH and not (self.forward_trapped and self.backward_trapped):
            raise DomainError("trapped_both requires both directions trapped")


@dataclass(frozen=True)
class ExpansionRates:
    """Transverse rates ``nu_min <= nu_max`` and the tangential ``mu_max``."""

    nu_min: float
    nu_max: float
    mu_max: float
    horizon: float
    sample_count: int
    r_normal_order: int
    per_sample: tuple = ()

    def __post_init__(self):
        if self.nu_min > self.nu_max:
            raise DomainError("nu_min exceeds nu_max")
        if self.mu_max < 0:
            raise DomainError("mu_max must be non-negative")
