"""Two-angle filtering of eigenvalues into resonances."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import PreconditionError
from .eigen import eigen_solve, eigenpair_residual
from .operator import DeformedOperator

log = logging.getLogger(__name__)

DRIFT_FLOOR = 1e-4
DRIFT_REL = 1e-3
CLUSTER_RADIUS = 1e-6
SECTOR_MARGIN = 0.05


@dataclass(frozen=True)
class Box:
    """Closed rectangle ``[re_min, re_max] x [im_min, im_max]`` in the omega plane."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if self.re_min > self.re_max or self.im_min > self.im_max:
            raise PreconditionError("box bounds are inverted")

    def contains(self, w) -> np.ndarray:
        w = np.asarray(w)
        return ((w.real >= self.re_min) & (w.real <= self.re_max)
                & (w.imag >= self.im_min) & (w.imag <= self.im_max))

    def covers(self, other: "Box") -> bool:
        return (self.re_min <= other.re_min and self.re_max >= other.re_max
                and self.im_min <= other.im_min and self.im_max >= other.im_max)

    @classmethod
    def of(cls, box) -> "Box":
        return box if isinstance(box, Box) else cls(*map(float, box))


@dataclass(frozen=True)
class Resonance:
    omega: complex
    energy: complex
    mode: int = -1
    multiplicity: int = 1
    residual: float = 0.0
    theta_drift: float = 0.0
    flagged: bool = False


class ResonanceList(list):
    """List of resonances carrying filter diagnostics."""

    def __init__(self, items=(), box=None, diagnostics=None):
        super().__init__(items)
        self.box = box
        self.diagnostics = diagnostics or {}


def drift_tolerance(omega) -> np.ndarray:
    return np.maximum(DRIFT_FLOOR, DRIFT_REL * np.abs(omega))


def _cluster(omegas, radius):
    """Greedy clustering; returns a list of index lists."""
    order = np.lexsort((omegas.imag, omegas.real))
    used = np.zeros(omegas.size, bool)
    groups = []
    for i in order:
        if used[i]:
            continue
        near = np.where((np.abs(omegas - omegas[i]) <= radius) & ~used)[0]
        used[near] = True
        groups.append(list(near))
    return groups


def filter_resonances(vals1, vals2, box, theta1: float, op: DeformedOperator = None,
                      mode: int = -1, multiplicity: int = 1,
                      cluster_radius: float = CLUSTER_RADIUS) -> ResonanceList:
    """Keep the eigenvalues whose square roots are stable between two angles."""
    box = Box.of(box)
    w1 = np.sqrt(np.asarray(vals1, complex))
    w2 = np.sqrt(np.asarray(vals2, complex))
    # principal root has Re >= 0; the box lives in Re omega > 0
    sel = box.contains(w1) & (np.angle(w1) > -theta1 + SECTOR_MARGIN) & (w1.real > 0)
    cand = w1[sel]
    E1 = np.asarray(vals1, complex)[sel]
    accepted, drifts, flags, energies = [], [], [], []
    rejected_drifts = []
    for w, E in zip(cand, E1):
        dist = np.abs(w2 - w)
        j = np.argsort(dist)[:2]
        d0 = float(dist[j[0]])
        tol = float(drift_tolerance(w))
        if d0 > tol:
            rejected_drifts.append(d0 / tol)
            continue
        ambiguous = j.size > 1 and float(dist[j[1]]) <= tol and abs(w2[j[1]] - w2[j[0]]) > cluster_radius
        accepted.append(w)
        energies.append(E)
        drifts.append(d0 + (float(dist[j[1]]) if ambiguous else 0.0))
        flags.append(bool(ambiguous))
    accepted = np.array(accepted, complex)
    out = ResonanceList(box=box)
    for g in _cluster(accepted, cluster_radius):
        k = g[0]
        resid = 0.0
        if op is not None:
            resid = eigenpair_residual(op, energies[k])[0]
        out.append(Resonance(
            omega=complex(accepted[k]),
            energy=complex(energies[k]),
            mode=mode,
            multiplicity=multiplicity * len(g),
            residual=float(resid),
            theta_drift=float(max(drifts[i] for i in g)),
            flagged=any(flags[i] for i in g),
        ))
    out.sort(key=lambda r: (-r.omega.imag, r.omega.real))
    marginal = [x for x in rejected_drifts if x < 10.0]
    out.diagnostics = {
        "candidates": int(cand.size),
        "accepted": len(accepted),
        "marginal_rejections": len(marginal),
        "separation_ok": not marginal,
    }
    if marginal:
        log.warning("%d eigenvalues drift between 1x and 10x the tolerance", len(marginal))
    return out


def extract_resonances(op_pair, search_box, mode: int = -1, multiplicity: int = 1,
                       residuals: bool = True) -> ResonanceList:
    """Resonances from operators built at two scaling angles ``theta2 >= theta1 + 0.1``."""
    op1, op2 = op_pair
    if op2.theta < op1.theta + 0.1 - 1e-12:
        raise PreconditionError("need theta2 >= theta1 + 0.1")
    if op1.size != op2.size or op1.h != op2.h or not np.array_equal(op1.grid, op2.grid):
        raise PreconditionError("operators must share grid and h")
    v1 = eigen_solve(op1, residuals=False).values
    v2 = eigen_solve(op2, residuals=False).values
    return filter_resonances(v1, v2, search_box, op1.theta, op1 if residuals else None,
                             mode, multiplicity)


def richardson(coarse, fine, dr_coarse: float, dr_fine: float, order: float = 2.0):
    """Eliminate the leading ``dr^order`` error term from two grid levels."""
    a, b = dr_coarse ** order, dr_fine ** order
    return (a * np.asarray(fine) - b * np.asarray(coarse)) / (a - b)


def match_nearest(ref, vals):
    """For each reference value, the nearest entry of ``vals``."""
    vals = np.asarray(vals, complex)
    return np.array([vals[np.argmin(np.abs(vals - r))] for r in np.atleast_1d(ref)])
