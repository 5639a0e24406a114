"""Adapted defining functions and the transport equation ``H_p a = f``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._flow_py import dopri
from ..errors import DegeneratePointError, DomainError, HorizonTooShortError, PreconditionError
from .system import HamiltonianSystem, _as_vector

PHI_TOL = 1e-8


@dataclass(frozen=True)
class DefiningData:
    c_plus: float
    c_minus: float
    bracket: float


def _hp(sys: HamiltonianSystem, z, grad_f):
    """``H_p f = d_xi p . d_x f - d_x p . d_xi f``."""
    gp = sys.grad_p(z)
    m = sys.dim
    return float(gp[m:] @ grad_f[:m] - gp[:m] @ grad_f[m:])


def poisson_bracket(m: int, grad_f, grad_g) -> float:
    """``{f, g}`` in the same convention as ``H_p = {p, .}``."""
    return float(grad_f[m:] @ grad_g[:m] - grad_f[:m] @ grad_g[m:])


def _rate(sys, phi, z, sign, tol):
    """``c = -sign * H_p phi / phi``, or its transverse limit on ``phi = 0``."""
    val, grad = phi(z)
    grad = np.asarray(grad, float)
    if abs(val) > tol:
        return -sign * _hp(sys, z, grad) / val
    nrm = float(np.linalg.norm(grad))
    if nrm < tol:
        raise DegeneratePointError("defining function and its derivative both vanish")
    v = grad / nrm

    def ratio(d):
        zp, zm = z + d * v, z - d * v
        vp, gp_ = phi(zp)
        vm, gm_ = phi(zm)
        num = _hp(sys, zp, np.asarray(gp_, float)) - _hp(sys, zm, np.asarray(gm_, float))
        den = vp - vm
        return num / den

    # H_p phi and phi both vanish on {phi = 0}; their transverse derivatives
    # give the limit.  Richardson on the centered ratio removes the d^2 term.
    r1, r2 = ratio(1e-3), ratio(5e-4)
    return -sign * (4.0 * r2 - r1) / 3.0


def defining_function_data(sys: HamiltonianSystem, phi_plus, phi_minus, point,
                           tol: float = PHI_TOL) -> DefiningData:
    """Rates ``c_pm`` with ``H_p phi_pm = -+ c_pm phi_pm`` and ``{phi_+, phi_-}``.

    ``phi_plus`` and ``phi_minus`` map a phase vector to ``(value, gradient)``.
    """
    z = _as_vector(point)
    cp = _rate(sys, phi_plus, z, +1.0, tol)
    cm = _rate(sys, phi_minus, z, -1.0, tol)
    _, gp = phi_plus(z)
    _, gm = phi_minus(z)
    return DefiningData(float(cp), float(cm),
                        poisson_bracket(sys.dim, np.asarray(gp, float), np.asarray(gm, float)))


def solve_transport(sys: HamiltonianSystem, sign: str, f, point, horizon: float,
                    nu_min: float = 1.0, rtol: float = 1e-12, atol: float = 1e-12,
                    tail_tol: float = 1e-6) -> float:
    """Solve ``H_p a = f`` at ``point`` on ``Gamma_sign``.

    ``a = +-int_0^inf f(exp(-+t H_p) point) dt``; the integral is carried as
    an extra ODE component over ``[0, horizon]`` and the tail is modelled as
    ``f(end) / nu_min``.
    """
    if sign not in ("+", "-"):
        raise DomainError("sign must be '+' or '-'")
    if not horizon > 0:
        raise PreconditionError("horizon must be positive")
    z0 = _as_vector(point)
    n = 2 * sys.dim
    m = sys.dim
    direction = -1.0 if sign == "+" else 1.0

    def rhs(t, y):
        z = y[:n]
        g = sys.grad_p(z)
        # ds-derivative chosen so the last component accumulates int_0^t f dt'
        return np.concatenate((g[m:], -g[:m], [direction * f(z)]))

    def stop(y):
        return abs(sys.signed_exit(y[:n])) > sys.escape_radius_outer

    y0 = np.concatenate((z0, [0.0]))
    ts, ys, escaped = dopri(rhs, y0, 0.0, direction * horizon, rtol, atol, stop=stop, store=False)
    if escaped:
        raise DomainError(f"trajectory escapes; point is not on Gamma_{sign}")
    integral = ys[-1][n]
    tail = f(ys[-1][:n]) / nu_min
    if abs(tail) > tail_tol * abs(integral) and abs(tail) > 1e-300:
        raise HorizonTooShortError(
            f"tail {tail:.3e} exceeds {tail_tol:g} of the integral {integral:.3e}")
    value = integral + tail
    return float(value if sign == "+" else -value)


def transport_residual(sys: HamiltonianSystem, sign: str, f, point, horizon: float,
                       times=(0.0, 0.5, 1.0, 2.0), delta: float = 1e-3, nu_min: float = 1.0) -> list:
    """``|H_p a - f|`` at points ``exp(t H_p) point`` along one flow line.

    ``H_p a`` is the centered derivative of ``a`` along the flow with step
    ``delta``.  Returns rows ``(t, H_p a, f, |H_p a - f|)``.
    """
    z0 = _as_vector(point)
    n = 2 * sys.dim
    m = sys.dim

    def rhs(t, y):
        g = sys.grad_p(y)
        return np.concatenate((g[m:], -g[:m]))

    def move(z, t):
        if t == 0:
            return z
        return dopri(rhs, z, 0.0, t, 1e-13, 1e-13, store=False)[1][-1][:n]

    rows = []
    for t in times:
        zt = move(z0, t)
        ap = solve_transport(sys, sign, f, move(zt, delta), horizon, nu_min)
        am = solve_transport(sys, sign, f, move(zt, -delta), horizon, nu_min)
        hpa = (ap - am) / (2 * delta)
        fz = float(f(zt))
        rows.append((float(t), float(hpa), fz, abs(hpa - fz)))
    return rows
