# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince kernel for warped-product geodesic flows.

Mirrors ``nhtrap._flow_py.integrate_warped`` step for step; the Python twin
is the fallback when this extension is not built.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cosh, tanh, sin, cos, fabs, pow, isfinite

cnp.import_array()

DEF MAXN = 6
DEF MAXS = 42

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920
cdef double E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40


cdef struct Model:
    int kind
    int m
    int n
    double inv_c2
    double beta
    double spert


cdef void derivs(Model* md, double* y, double* grad, double* hess, bint want_hess) noexcept nogil:
    cdef int n = md.n, i, j, ixr
    cdef double gG[MAXN]
    cdef double hG[MAXN * MAXN]
    cdef double gQ[MAXN]
    cdef double r = y[0]
    cdef double sech = 1.0 / cosh(r)
    cdef double th = tanh(r)
    cdef double S = sech * sech
    cdef double dS = -2.0 * S * th
    cdef double d2S = 4.0 * S * th * th - 2.0 * S * S
    cdef double G, xr, xt, s, xs, xp, a, da, d2a, Q, pv, sn, cs, sp
    for i in range(n):
        gG[i] = 0.0
        for j in range(n):
            hG[i * n + j] = 0.0
    if md.kind == 0:
        xr = y[2]
        xt = y[3]
        G = xt * xt
        gG[3] = 2.0 * xt
        hG[3 * n + 3] = 2.0
        ixr = 2
    else:
        s = y[1]
        xr = y[3]
        xs = y[4]
        xp = y[5]
        a = 1.0 + md.beta * cos(s)
        da = -md.beta * sin(s)
        d2a = -md.beta * cos(s)
        G = xs * xs + xp * xp / (a * a)
        gG[1] = -2.0 * xp * xp * da / (a * a * a)
        gG[4] = 2.0 * xs
        gG[5] = 2.0 * xp / (a * a)
        hG[1 * n + 1] = xp * xp * (6.0 * da * da / (a * a * a * a) - 2.0 * d2a / (a * a * a))
        hG[1 * n + 5] = -4.0 * xp * da / (a * a * a)
        hG[5 * n + 1] = hG[1 * n + 5]
        hG[4 * n + 4] = 2.0
        hG[5 * n + 5] = 2.0 / (a * a)
        ixr = 3
    Q = xr * xr + S * G * md.inv_c2
    for i in range(n):
        gQ[i] = S * md.inv_c2 * gG[i]
    gQ[0] = dS * G * md.inv_c2
    gQ[ixr] = 2.0 * xr
    pv = sqrt(Q)
    for i in range(n):
        grad[i] = gQ[i] / (2.0 * pv)
    if want_hess:
        for i in range(n):
            for j in range(n):
                hess[i * n + j] = S * md.inv_c2 * hG[i * n + j]
        for j in range(1, n):
            hess[j] = dS * md.inv_c2 * gG[j]
            hess[j * n] = hess[j]
        hess[0] = d2S * G * md.inv_c2
        hess[ixr * n + ixr] = 2.0
        for i in range(n):
            for j in range(n):
                hess[i * n + j] = hess[i * n + j] / (2.0 * pv) - gQ[i] * gQ[j] / (4.0 * pv * pv * pv)
    if md.kind == 0 and md.spert != 0.0:
        sp = md.spert
        sn = sin(y[1])
        cs = cos(y[1])
        grad[0] += -sp * sn * sech * th
        grad[1] += sp * cs * sech
        if want_hess:
            hess[0] += sp * sn * sech * (th * th - S)
            hess[1] += -sp * cs * sech * th
            hess[n] += -sp * cs * sech * th
            hess[n + 1] += -sp * sn * sech


cdef void rhs(Model* md, double* y, double* dy, bint with_var) noexcept nogil:
    cdef int n = md.n, m = md.m, i, j, k
    cdef double grad[MAXN]
    cdef double hess[MAXN * MAXN]
    cdef double acc
    derivs(md, y, grad, hess, with_var)
    for i in range(m):
        dy[i] = grad[m + i]
        dy[m + i] = -grad[i]
    if with_var:
        # dM = J (H M); rows of J H are (H[m:], -H[:m]).
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for k in range(n):
                    acc += hess[i * n + k] * y[n + k * n + j]
                if i < m:
                    dy[n + (i + m) * n + j] = -acc
                else:
                    dy[n + (i - m) * n + j] = acc


def integrate_warped(params, y0, M0, double t0, double t1, double rtol,
                     double atol, double escape_radius, bint store=True):
    """Compiled twin of ``_flow_py.integrate_warped``."""
    cdef Model md
    md.kind = int(params[0])
    md.m = 2 if md.kind == 0 else 3
    md.n = 2 * md.m
    md.inv_c2 = 1.0 / (float(params[1]) * float(params[1]))
    md.beta = float(params[2])
    md.spert = float(params[3])
    cdef bint with_var = M0 is not None
    cdef int n = md.n
    cdef int ns = n + n * n if with_var else n
    cdef int i
    cdef double y[MAXS]
    cdef double ynew[MAXS]
    cdef double tmp[MAXS]
    cdef double k1[MAXS]
    cdef double k2[MAXS]
    cdef double k3[MAXS]
    cdef double k4[MAXS]
    cdef double k5[MAXS]
    cdef double k6[MAXS]
    cdef double k7[MAXS]
    cdef double[:] y0v = np.ascontiguousarray(y0, dtype=np.float64)
    cdef double[:] m0v
    for i in range(n):
        y[i] = y0v[i]
    if with_var:
        m0v = np.ascontiguousarray(M0, dtype=np.float64).ravel()
        for i in range(n * n):
            y[n + i] = m0v[i]

    ts = [t0]
    ys = [[y[i] for i in range(ns)]]
    cdef double t = t0
    cdef double span = t1 - t0
    if span == 0.0:
        return _pack(ts, ys, n, with_var, False)
    cdef double direction = 1.0 if span > 0 else -1.0
    cdef double h, hs, err, sc, d0, d1, factor, e
    cdef bint escaped = False
    cdef long steps = 0
    rhs(&md, y, k1, with_var)
    for i in range(ns):
        if not isfinite(k1[i]):
            from .errors import IntegrationError
            raise IntegrationError("non-finite derivative", time=t)
    d0 = 0.0
    d1 = 0.0
    for i in range(ns):
        sc = atol + rtol * fabs(y[i])
        d0 += (y[i] / sc) * (y[i] / sc)
        d1 += (k1[i] / sc) * (k1[i] / sc)
    d0 = sqrt(d0 / ns)
    d1 = sqrt(d1 / ns)
    if d0 > 1e-5 and d1 > 1e-5:
        h = 0.01 * d0 / d1
    else:
        h = 1e-6
    h = min(h, fabs(span), 0.1)

    while direction * (t1 - t) > 0:
        if steps >= 2000000:
            from .errors import IntegrationError
            raise IntegrationError("step budget exhausted", time=t)
        h = min(h, fabs(t1 - t))
        hs = direction * h
        for i in range(ns):
            tmp[i] = y[i] + hs * (A21 * k1[i])
        rhs(&md, tmp, k2, with_var)
        for i in range(ns):
            tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i])
        rhs(&md, tmp, k3, with_var)
        for i in range(ns):
            tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(&md, tmp, k4, with_var)
        for i in range(ns):
            tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        rhs(&md, tmp, k5, with_var)
        for i in range(ns):
            tmp[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
        rhs(&md, tmp, k6, with_var)
        for i in range(ns):
            ynew[i] = y[i] + hs * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
        rhs(&md, ynew, k7, with_var)
        err = 0.0
        for i in range(ns):
            if not (isfinite(k7[i]) and isfinite(ynew[i])):
                from .errors import IntegrationError
                raise IntegrationError("non-finite derivative", time=t + hs)
            e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            sc = atol + rtol * max(fabs(y[i]), fabs(ynew[i]))
            err += (e / sc) * (e / sc)
        err = sqrt(err / ns)
        steps += 1
        if err <= 1.0:
            t = t + hs
            for i in range(ns):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if store:
                ts.append(t)
                ys.append([y[i] for i in range(ns)])
            if fabs(y[0]) > escape_radius:
                escaped = True
                break
            if err == 0.0:
                factor = 5.0
            else:
                factor = min(5.0, 0.9 * pow(err, -0.2))
            h = h * max(factor, 0.2)
        else:
            h = h * max(0.2, 0.9 * pow(err, -0.2))
            if h < 1e-14 * max(1.0, fabs(t)):
                from .errors import IntegrationError
                raise IntegrationError("step size underflow", time=t)
    if not store:
        ts.append(t)
        ys.append([y[i] for i in range(ns)])
    return _pack(ts, ys, n, with_var, escaped)


def _pack(ts, ys, int n, bint with_var, bint escaped):
    arr = np.array(ys, dtype=np.float64)
    tarr = np.array(ts, dtype=np.float64)
    if with_var:
        return tarr, arr[:, :n].copy(), arr[:, n:].reshape(-1, n, n), escaped
    return tarr, arr, None, escaped
