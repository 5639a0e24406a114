"""Pure-Python flow kernel.

This module is the reference twin of the compiled ``_flowcore`` extension:
same Dormand-Prince 5(4) stepper, same step-size controller, same warped
product Hamiltonians.  ``nhtrap.kernels`` picks one of the two at import.
"""
import math

import numpy as np

from .errors import IntegrationError

# Dormand-Prince 5(4) tableau.
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1 = 71 / 57600
E3 = -71 / 16695
E4 = 71 / 1920
E5 = -17253 / 339200
E6 = 22 / 525
E7 = -1 / 40

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0

CIRCLE = 0
TORUS = 1


def dopri(rhs, y0, t0, t1, rtol=1e-10, atol=1e-10, stop=None, h0=None,
          max_steps=2_000_000, store=True):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    ``stop(y)`` is evaluated after every accepted step; integration ends
    early the first time it returns True.

    Returns ``(ts, ys, stopped)``.  With ``store=False`` only the endpoints
    are returned.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    span = float(t1) - t
    ts = [t]
    ys = [y.copy()]
    if span == 0.0:
        return np.array(ts), np.array(ys), False
    direction = 1.0 if span > 0 else -1.0
    k1 = rhs(t, y)
    if not np.all(np.isfinite(k1)):
        raise IntegrationError("non-finite derivative", time=t)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = math.sqrt(np.mean((y / scale) ** 2))
        d1 = math.sqrt(np.mean((k1 / scale) ** 2))
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h = min(h, abs(span), 0.1)
    else:
        h = abs(h0)
    stopped = False
    steps = 0
    while direction * (t1 - t) > 0:
        if steps >= max_steps:
            raise IntegrationError("step budget exhausted", time=t)
        h = min(h, abs(t1 - t))
        hs = direction * h
        k2 = rhs(t + C2 * hs, y + hs * (A21 * k1))
        k3 = rhs(t + C3 * hs, y + hs * (A31 * k1 + A32 * k2))
        k4 = rhs(t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = rhs(t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = rhs(t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y_new = y + hs * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = rhs(t + hs, y_new)
        if not (np.all(np.isfinite(k7)) and np.all(np.isfinite(y_new))):
            raise IntegrationError("non-finite derivative", time=t + hs)
        err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(np.mean((err_vec / scale) ** 2))
        steps += 1
        if err <= 1.0:
            t = t + hs
            y = y_new
            k1 = k7
            if store:
                ts.append(t)
                ys.append(y.copy())
            if stop is not None and stop(y):
                stopped = True
                break
            factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
            h = h * max(factor, MIN_FACTOR)
        else:
            h = h * max(MIN_FACTOR, SAFETY * err ** -0.2)
            if h < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError("step size underflow", time=t)
    if not store:
        ts.append(t)
        ys.append(y.copy())
    return np.array(ts), np.array(ys), stopped


def flow_rhs(grad, hess, m, with_variational):
    """Right-hand side of Hamilton's equations, optionally with ``M' = J H M``."""
    n = 2 * m

    if not with_variational:
        def rhs(t, y):
            g = grad(y)
            return np.concatenate((g[m:], -g[:m]))
        return rhs

    def rhs_var(t, y):
        z = y[:n]
        g = grad(z)
        H = hess(z)
        M = y[n:].reshape(n, n)
        HM = H @ M
        dM = np.concatenate((HM[m:], -HM[:m]))
        return np.concatenate((g[m:], -g[:m], dM.ravel()))
    return rhs_var


def warped_derivs(params, y, order=2):
    """Value, gradient and Hessian of a warped-product Hamiltonian.

    ``params = (kind, C, beta, spert)``.  For ``kind == CIRCLE`` the state is
    ``(r, theta, xi_r, xi_theta)`` and
    ``p = sqrt(xi_r^2 + sech(r)^2 xi_theta^2 / C^2) + spert sin(theta) sech(r)``.
    For ``kind == TORUS`` the state is ``(r, s, phi, xi_r, xi_s, xi_phi)``
    and the cross-section metric is ``ds^2 + a(s)^2 dphi^2`` with
    ``a(s) = 1 + beta cos(s)``.
    """
    kind, C, beta, spert = params
    inv_c2 = 1.0 / (C * C)
    r = y[0]
    sech = 1.0 / math.cosh(r)
    th = math.tanh(r)
    S = sech * sech
    dS = -2.0 * S * th
    d2S = 4.0 * S * th * th - 2.0 * S * S
    if kind == CIRCLE:
        xr, xt = y[2], y[3]
        G = xt * xt
        n = 4
        gG = np.zeros(n)
        gG[3] = 2.0 * xt
        hG = np.zeros((n, n))
        hG[3, 3] = 2.0
        ixr = 2
    else:
        s, xr, xs, xp = y[1], y[3], y[4], y[5]
        a = 1.0 + beta * math.cos(s)
        da = -beta * math.sin(s)
        d2a = -beta * math.cos(s)
        G = xs * xs + xp * xp / (a * a)
        n = 6
        gG = np.zeros(n)
        gG[1] = -2.0 * xp * xp * da / a ** 3
        gG[4] = 2.0 * xs
        gG[5] = 2.0 * xp / (a * a)
        hG = np.zeros((n, n))
        hG[1, 1] = xp * xp * (6.0 * da * da / a ** 4 - 2.0 * d2a / a ** 3)
        hG[1, 5] = hG[5, 1] = -4.0 * xp * da / a ** 3
        hG[4, 4] = 2.0
        hG[5, 5] = 2.0 / (a * a)
        ixr = 3
    Q = xr * xr + S * G * inv_c2
    gQ = S * inv_c2 * gG
    gQ[0] = dS * G * inv_c2
    gQ[ixr] = 2.0 * xr
    pv = math.sqrt(Q)
    if order == 0:
        val = pv
        if kind == CIRCLE and spert != 0.0:
            val += spert * math.sin(y[1]) * sech
        return val
    grad = gQ / (2.0 * pv)
    if order >= 2:
        hQ = S * inv_c2 * hG
        hQ[0, 0] = d2S * G * inv_c2
        row = dS * inv_c2 * gG
        row[0] = d2S * G * inv_c2
        hQ[0, :] = row
        hQ[:, 0] = row
        hQ[ixr, ixr] = 2.0
        hess = hQ / (2.0 * pv) - np.outer(gQ, gQ) / (4.0 * pv ** 3)
    val = pv
    if kind == CIRCLE and spert != 0.0:
        th1 = y[1]
        sn, cs = math.sin(th1), math.cos(th1)
        val += spert * sn * sech
        grad[0] += -spert * sn * sech * th
        grad[1] += spert * cs * sech
        if order >= 2:
            hess[0, 0] += spert * sn * sech * (th * th - S)
            hess[0, 1] += -spert * cs * sech * th
            hess[1, 0] += -spert * cs * sech * th
            hess[1, 1] += -spert * sn * sech
    if order == 1:
        return val, grad
    return val, grad, hess


def integrate_warped(params, y0, M0, t0, t1, rtol, atol, escape_radius,
                     store=True):
    """Integrate a warped-product flow, optionally with a monodromy block.

    Escape is measured by ``|r|``.  Returns ``(ts, ys, Ms, escaped)`` where
    ``Ms`` is None when ``M0`` is None.
    """
    kind = params[0]
    m = 2 if kind == CIRCLE else 3
    n = 2 * m

    def grad(z):
        return warped_derivs(params, z, order=1)[1]

    def hess(z):
        return warped_derivs(params, z, order=2)[2]

    with_var = M0 is not None
    if with_var:
        state0 = np.concatenate((np.asarray(y0, float), np.asarray(M0, float).ravel()))
    else:
        state0 = np.asarray(y0, float)
    rhs = flow_rhs(grad, hess, m, with_var)
    if with_var:
        # Hessian and gradient share most of their work.
        def rhs(t, y):
            z = y[:n]
            _, g, H = warped_derivs(params, z, order=2)
            M = y[n:].reshape(n, n)
            HM = H @ M
            dM = np.concatenate((HM[m:], -HM[:m]))
            return np.concatenate((g[m:], -g[:m], dM.ravel()))

    def stop(y):
        return abs(y[0]) > escape_radius

    ts, ys, escaped = dopri(rhs, state0, t0, t1, rtol, atol, stop=stop, store=store)
    if with_var:
        return ts, ys[:, :n].copy(), ys[:, n:].reshape(-1, n, n), escaped
    return ts, ys, None, escaped
