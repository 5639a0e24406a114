"""Flow integration, trapping classification and trapped-set search."""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .. import kernels
from .._flow_py import dopri, flow_rhs
from ..errors import DomainError, PreconditionError
from .system import (
    ESCAPED,
    TRAPPED_BACKWARD,
    TRAPPED_BOTH,
    TRAPPED_FORWARD,
    FlowResult,
    HamiltonianSystem,
    PhasePoint,
    TrappedSample,
    _as_vector,
)

RTOL = 1e-10
ATOL = 1e-10
# Escapes whose exit time moves by more than this when the tolerance is
# tightened are driven by integration error, not by the dynamics.
ESCAPE_TIME_SHIFT = 0.25
CERTIFY_RTOL = 1e-12


def _run(sys: HamiltonianSystem, z0, t0, t1, with_variational, rtol, atol, store):
    """Return ``(ts, states, monodromies or None, escaped)``."""
    n = 2 * sys.dim
    M0 = np.eye(n) if with_variational else None
    if sys.native is not None:
        return kernels.integrate_warped(sys.native, z0, M0, t0, t1, rtol, atol,
                                        sys.escape_radius_outer, store)
    rhs = flow_rhs(sys.grad_p, sys.hess_p, sys.dim, with_variational)
    y0 = np.concatenate((z0, M0.ravel())) if with_variational else np.asarray(z0, float)
    outer = sys.escape_radius_outer

    def stop(y):
        return abs(sys.signed_exit(y[:n])) > outer

    ts, ys, escaped = dopri(rhs, y0, t0, t1, rtol, atol, stop=stop, store=store)
    if with_variational:
        return ts, ys[:, :n].copy(), ys[:, n:].reshape(-1, n, n), escaped
    return ts, ys, None, escaped


def integrate_flow(sys: HamiltonianSystem, start, t_span, with_variational: bool = False,
                   rtol: float = RTOL, atol: float = ATOL, store: bool = True) -> FlowResult:
    """Integrate ``x' = dp/dxi, xi' = -dp/dx`` over ``t_span``.

    With ``with_variational`` the monodromy ``M' = J Hess(p) M, M(0) = I``
    is carried along.  Integration stops early once the exit coordinate
    passes ``escape_radius_outer``.
    """
    z0 = _as_vector(start)
    if z0.size != 2 * sys.dim:
        raise DomainError("start has the wrong dimension")
    t0, t1 = (float(t) for t in t_span)
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise DomainError("t_span must be finite")
    if abs(sys.signed_exit(z0)) > sys.escape_radius_outer:
        raise DomainError("start lies outside escape_radius_outer")
    ts, ys, Ms, escaped = _run(sys, z0, t0, t1, with_variational, rtol, atol, store)
    return FlowResult(
        times=ts,
        states=ys,
        monodromy=Ms,
        escaped=bool(escaped),
        escape_time=float(ts[-1]) if escaped else None,
    )


def _crossing_time(sys, t_end, z_end):
    """Time at which the exit coordinate crossed the outer radius.

    The integrator stops after the step that crosses; this backs the
    overshoot out with the exit coordinate's rate of change along ``H_p``.
    """
    e = sys.signed_exit(z_end)
    X = sys.hamilton_field(z_end)
    eps = 1e-7
    rate = (abs(sys.signed_exit(z_end + eps * X)) - abs(sys.signed_exit(z_end - eps * X))) / (2 * eps)
    t = abs(t_end)
    if rate > 1e-12:
        t -= (abs(e) - sys.escape_radius_outer) / rate
    return t


def _escape(sys, z0, horizon, direction, certify):
    """Signed exit side (0 if trapped) and the survival time in one direction."""
    ts, ys, _, escaped = _run(sys, z0, 0.0, direction * horizon, False, RTOL, ATOL, False)
    if not escaped:
        return 0, horizon
    z_end = ys[-1]
    if direction < 0:
        # the exit coordinate grows along -H_p in backward time
        t_esc = _crossing_time(_Reversed(sys), ts[-1], z_end)
    else:
        t_esc = _crossing_time(sys, ts[-1], z_end)
    side = 1 if sys.signed_exit(z_end) > 0 else -1
    if certify:
        ts2, ys2, _, esc2 = _run(sys, z0, 0.0, direction * horizon, False,
                                 CERTIFY_RTOL, CERTIFY_RTOL, False)
        if not esc2:
            return 0, horizon
        if direction < 0:
            t2 = _crossing_time(_Reversed(sys), ts2[-1], ys2[-1])
        else:
            t2 = _crossing_time(sys, ts2[-1], ys2[-1])
        side2 = 1 if sys.signed_exit(ys2[-1]) > 0 else -1
        if abs(t2 - t_esc) > ESCAPE_TIME_SHIFT or side2 != side:
            return 0, horizon
    return side, t_esc


class _Reversed:
    """View of a system with the Hamilton field reversed."""

    def __init__(self, sys):
        self._sys = sys
        self.escape_radius_outer = sys.escape_radius_outer

    def signed_exit(self, z):
        return self._sys.signed_exit(z)

    def hamilton_field(self, z):
        return -self._sys.hamilton_field(z)


def _classify_sides(sys, z0, horizon, certify=True):
    fwd, tf = _escape(sys, z0, horizon, 1.0, certify)
    bwd, tb = _escape(sys, z0, horizon, -1.0, certify)
    return fwd, bwd, tf, tb


def _label(fwd, bwd):
    if fwd == 0 and bwd == 0:
        return TRAPPED_BOTH
    if fwd == 0:
        return TRAPPED_FORWARD
    if bwd == 0:
        return TRAPPED_BACKWARD
    return ESCAPED


def classify_trapping(sys: HamiltonianSystem, point, horizon: float,
                      certify: bool = True) -> TrappedSample:
    """Classify ``point`` by escape in forward and backward time.

    An escape counts only if its exit time is insensitive to tightening the
    integration tolerance; otherwise the exit is attributed to error growth
    along an unstable direction and the direction counts as trapped.
    """
    if not horizon > 0:
        raise PreconditionError("horizon must be positive")
    z0 = _as_vector(point)
    fwd, bwd, _, _ = _classify_sides(sys, z0, float(horizon), certify)
    return TrappedSample(
        point=PhasePoint.from_vector(z0),
        classification=_label(fwd, bwd),
        horizon=float(horizon),
        forward_trapped=fwd == 0,
        backward_trapped=bwd == 0,
    )


def project_to_shell(sys: HamiltonianSystem, point, energy: float,
                     tol: float = 1e-9) -> PhasePoint:
    """Move ``point`` along its momentum direction onto ``p = energy``."""
    z = _as_vector(point).copy()
    m = sys.dim
    xi = z[m:]
    nrm = float(np.linalg.norm(xi))
    d = xi / nrm if nrm > 0 else np.eye(m)[0]

    def g(lam):
        w = z.copy()
        w[m:] = xi + lam * d
        return sys.p(w) - energy

    g0 = g(0.0)
    if abs(g0) <= 1e-14 * max(1.0, abs(energy)):
        return PhasePoint.from_vector(z)
    lam = None
    # Scan outward in small steps so the crossing nearest to the seed wins.
    base = 0.05 * max(nrm, 1.0)
    offsets = [base * k for k in range(1, 41)]
    while offsets[-1] < 1e8:
        offsets.append(offsets[-1] * 1.5)
    prev = {1.0: 0.0, -1.0: 0.0}
    for off in offsets:
        for sgn in (1.0, -1.0):
            cand = sgn * off
            if np.sign(g(cand)) != np.sign(g0):
                lo, hi = sorted((prev[sgn], cand))
                lam = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
                break
            prev[sgn] = cand
        if lam is not None:
            break
    if lam is None:
        # Tangential contact with the shell (e.g. a barrier top).
        span = max(nrm, 1.0) * 4
        res = minimize_scalar(lambda s: g(s) ** 2, bounds=(-span, span), method="bounded",
                              options={"xatol": 1e-14})
        lam = float(res.x)
    w = z.copy()
    w[m:] = xi + lam * d
    if abs(sys.p(w) - energy) > tol:
        raise DomainError("could not project seed onto the energy shell")
    return PhasePoint.from_vector(w)


def find_trapped_set(sys: HamiltonianSystem, energy: float, seeds: Sequence,
                     horizon: float, max_bisections: int = 80) -> list:
    """Locate trapped points by bisecting between seeds with different exits.

    Seeds are projected to the energy shell and classified by exit side in
    each time direction.  Neighbouring seeds whose exit sides differ bracket
    a trapped point.  The segment is bisected (projecting midpoints back onto
    the shell) onto the tail where an exit side flips; the bracketing pair
    is then advanced along the flow and re-bisected so that it slides onto
    the trapped set.  Only points surviving ``horizon`` in both directions
    are returned.
    """
    if not horizon > 0:
        raise PreconditionError("horizon must be positive")
    horizon = float(horizon)
    pts = [project_to_shell(sys, s, energy).vector() for s in seeds]
    sides = [_classify_sides(sys, z, horizon) for z in pts]
    found = []
    for z, (f, b, _, _) in zip(pts, sides):
        if f == 0 and b == 0:
            found.append(_sample(z, horizon))
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        sa, sb = sides[i][:2], sides[i + 1][:2]
        if sa == sb or (sa == (0, 0)) or (sb == (0, 0)):
            continue
        try:
            mid = project_to_shell(sys, 0.5 * (a + b), energy).vector()
        except DomainError:
            continue  # the shell is disconnected between the seeds
        f, bw, _, _ = _classify_sides(sys, mid, horizon)
        if f == 0 and bw == 0:
            found.append(_sample(mid, horizon))
            continue
        hit = _bisect(sys, energy, a, b, sa, sb, horizon, max_bisections)
        if hit is not None:
            found.append(hit)
    return found


def _sample(z, horizon):
    return TrappedSample(PhasePoint.from_vector(z), TRAPPED_BOTH, horizon, True, True)


def _side(sys, z, horizon, k):
    """Uncertified exit side in the time direction indexed by ``k``."""
    return _escape(sys, z, horizon, 1.0 if k == 0 else -1.0, False)[0]


def _tighten(sys, energy, a, b, sa, horizon, k, max_bisections):
    """Bisect ``[a, b]`` on the exit side of direction ``k`` to rounding level."""
    for _ in range(max_bisections):
        if np.linalg.norm(b - a) <= 1e-13 * (1.0 + np.linalg.norm(a)):
            break
        mid = project_to_shell(sys, 0.5 * (a + b), energy).vector()
        if _side(sys, mid, horizon, k) == sa:
            a = mid
        else:
            b = mid
    return a, b


def _bisect(sys, energy, a, b, sa, sb, horizon, max_bisections, straddle_time=None):
    """Refine a bracketing pair onto the trapped set.

    The pair is first bisected onto the stable (or unstable) tail whose exit
    side differs between the endpoints; then both points are advanced along
    the flow and re-bisected repeatedly, so the pair slides along the tail
    towards the trapped set.
    """
    k = 0 if sa[0] != sb[0] else 1
    direction = 1.0 if k == 0 else -1.0
    sa_k = _side(sys, a, horizon, k)
    try:
        a, b = _tighten(sys, energy, a, b, sa_k, horizon, k, max_bisections)
        total = straddle_time if straddle_time is not None else min(0.5 * horizon, 40.0)
        t = 0.0
        while t < total:
            dt = min(1.0, total - t)
            a = _run(sys, a, 0.0, direction * dt, False, RTOL, ATOL, False)[1][-1]
            b = _run(sys, b, 0.0, direction * dt, False, RTOL, ATOL, False)[1][-1]
            sa_k = _side(sys, a, horizon, k)
            if _side(sys, b, horizon, k) == sa_k:
                break  # exit sides are now set by integration error
            a, b = _tighten(sys, energy, a, b, sa_k, horizon, k, max_bisections)
            t += dt
        mid = project_to_shell(sys, 0.5 * (a + b), energy).vector()
    except DomainError:
        # the shell is disconnected between the seeds
        return None
    f, bw, _, _ = _classify_sides(sys, mid, horizon)
    if f == 0 and bw == 0:
        return _sample(mid, horizon)
    return None


def symplectic_form(m: int) -> np.ndarray:
    J = np.zeros((2 * m, 2 * m))
    J[:m, m:] = np.eye(m)
    J[m:, :m] = -np.eye(m)
    return J


def flow_invariants(sys: HamiltonianSystem, result: FlowResult) -> dict:
    """Energy drift and symplectic defects over every stored sample.

    ``energy``: ``max |p(z_t) - p(z_0)|``; ``symplectic``:
    ``max ||M^T J M - J||_2``; ``det``: ``max |det M - 1|``.
    """
    p0 = sys.p(result.states[0])
    out = {"energy": max(abs(sys.p(z) - p0) for z in result.states)}
    if result.monodromy is not None:
        J = symplectic_form(sys.dim)
        out["symplectic"] = max(float(np.linalg.norm(M.T @ J @ M - J, 2)) for M in result.monodromy)
        out["det"] = max(abs(float(np.linalg.det(M)) - 1.0) for M in result.monodromy)
    return out


def group_defect(sys: HamiltonianSystem, start, t1: float, t2: float,
                 rtol: float = RTOL, atol: float = ATOL) -> float:
    """``|| exp(t2 H) exp(t1 H) z - exp((t1 + t2) H) z ||``."""
    z0 = _as_vector(start)
    a = _run(sys, z0, 0.0, t1, False, rtol, atol, False)[1][-1]
    b = _run(sys, a, 0.0, t2, False, rtol, atol, False)[1][-1]
    c = _run(sys, z0, 0.0, t1 + t2, False, rtol, atol, False)[1][-1]
    return float(np.linalg.norm(b - c))
