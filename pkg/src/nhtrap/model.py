"""The exactly solvable model case: projector, divided difference, propagator.

The model lives on ``R^2 = {(x', x_n)}`` with ``p = x_n xi_n`` and
``U(t) f(x', x_n) = e^{-t/2} f(x', e^{-t} x_n)``; the quantization
acts on ``R^1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AliasingRiskError, DomainError, PreconditionError

DECAY_TOL = 1e-12


@dataclass(frozen=True)
class GridFunction:
    """Samples on a tensor grid; the last axis is ``x_n`` and contains 0.

    ``xn = dx * (arange(N2) - j0)`` so that ``xn[j0] == 0`` exactly.
    """

    values: np.ndarray
    xn: np.ndarray
    x1: Optional[np.ndarray] = None
    h: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim not in (1, 2):
            raise DomainError("dims must be 1 or 2")
        if (v.ndim == 2) != (self.x1 is not None):
            raise DomainError("two-dimensional values need an x' grid")
        if v.shape[-1] != self.xn.size or (self.x1 is not None and v.shape[0] != self.x1.size):
            raise DomainError("values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise DomainError("grid function has non-finite values")
        if np.count_nonzero(self.xn == 0.0) != 1:
            raise DomainError("x_n = 0 must be a grid point")
        object.__setattr__(self, "values", v)

    @property
    def dims(self) -> int:
        return self.values.ndim

    @property
    def j0(self) -> int:
        return int(np.flatnonzero(self.xn == 0.0)[0])

    @property
    def dxn(self) -> float:
        return float(self.xn[1] - self.xn[0])

    @property
    def dx1(self) -> float:
        return 1.0 if self.x1 is None else float(self.x1[1] - self.x1[0])

    def with_values(self, values) -> "GridFunction":
        return GridFunction(values, self.xn, self.x1, self.h)

    def l2(self) -> float:
        """Trapezoid (equivalently, rectangle) L^2 norm."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.dxn * self.dx1))


def symmetric_axis(n_half: int, dx: float) -> np.ndarray:
    """``dx * k`` for ``k = -n_half .. n_half - 1`` (contains 0 exactly)."""
    return dx * (np.arange(2 * n_half) - n_half).astype(float)


def make_grid_function(fun: Callable, n1: int, n2: int, L1: float, L2: float,
                       h: float = 1.0) -> GridFunction:
    """Sample ``fun(x', x_n)`` (or ``fun(x_n)`` when ``n1 == 0``)."""
    xn = symmetric_axis(n2 // 2, 2 * L2 / n2)
    if n1 == 0:
        return GridFunction(np.asarray(fun(xn), complex), xn, None, h)
    x1 = symmetric_axis(n1 // 2, 2 * L1 / n1)
    X1, XN = np.meshgrid(x1, xn, indexing="ij")
    return GridFunction(np.asarray(fun(X1, XN), complex), xn, x1, h)


def model_projector(f: GridFunction) -> GridFunction:
    """``Pi0 f (x', x_n) = f(x', 0)``."""
    slice0 = f.values[..., f.j0:f.j0 + 1]
    return f.with_values(np.broadcast_to(slice0, f.values.shape).copy())


def _exact_quotient(num: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``num / x`` nudged by up to two ulps so that ``q * x == num`` when possible."""
    q = num / x
    for _ in range(2):
        miss = q * x != num
        if not np.any(miss):
            break
        up = np.nextafter(q, np.inf)
        dn = np.nextafter(q, -np.inf)
        q = np.where(miss & (up * x == num), up, q)
        q = np.where(miss & (dn * x == num) & (q * x != num), dn, q)
        q = np.where(miss & (q * x != num), np.where(np.abs(q * x - num) > np.abs(up * x - num), up, q), q)
    return q


def model_xi(f: GridFunction) -> GridFunction:
    """``Xi0 f = (f - f(x', 0)) / x_n``; the axis row holds the centered derivative.

    The quotient is corrected at the last bit so that multiplying back by
    ``x_n`` reproduces ``(1 - Pi0) f`` exactly whenever some double does.
    """
    j0 = f.j0
    v = f.values
    num = v - v[..., j0:j0 + 1]
    x = f.xn.copy()
    x[j0] = 1.0
    out = np.empty_like(v)
    out.real = _exact_quotient(num.real, x)
    out.imag = _exact_quotient(num.imag, x)
    out[..., j0] = (v[..., j0 + 1] - v[..., j0 - 1]) / (2.0 * f.dxn)
    return f.with_values(out)


def multiply_xn(f: GridFunction) -> GridFunction:
    return f.with_values(f.values * f.xn)


def _cubic_sample(v: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Cubic interpolation along the last axis at fractional node indices ``pos``.

    Newton form anchored at the node ``j = floor(pos)``, so that constant
    data and on-node targets are reproduced exactly.
    """
    n = v.shape[-1]
    j = np.clip(np.floor(pos).astype(int), 1, n - 3)
    s = pos - j
    f0 = v[..., j]
    fp = v[..., j + 1]
    fm = v[..., j - 1]
    fpp = v[..., j + 2]
    d1 = fp - f0
    d2 = (fp - 2.0 * f0 + fm) / 2.0
    d3 = (fpp - 3.0 * fp + 3.0 * f0 - fm) / 6.0
    return f0 + s * d1 + s * (s - 1.0) * d2 + s * (s - 1.0) * (s + 1.0) * d3


def model_propagator(f: GridFunction, t: float) -> GridFunction:
    """``U(t) f = e^{-t/2} f(x', e^{-t} x_n)`` by cubic interpolation."""
    if t == 0:
        return f.with_values(f.values.copy())
    target = np.exp(-t) * f.xn
    if np.max(np.abs(target)) > max(abs(f.xn[0]), abs(f.xn[-1])) or target[-1] > f.xn[-1]:
        raise DomainError("dilation leaves the grid")
    pos = target / f.dxn + f.j0
    return f.with_values(np.exp(-t / 2.0) * _cubic_sample(f.values, pos))


def spectral_derivative(v: np.ndarray, dx: float, axis: int = -1) -> np.ndarray:
    n = v.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    shape = [1] * v.ndim
    shape[axis] = n
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(v, axis=axis), axis=axis)


def h1_norm(f: GridFunction, h: float = 1.0) -> float:
    """``(||f||^2 + ||h d f||^2)^{1/2}`` with spectral derivatives."""
    w = f.dxn * f.dx1
    tot = np.sum(np.abs(f.values) ** 2)
    tot += h * h * np.sum(np.abs(spectral_derivative(f.values, f.dxn, -1)) ** 2)
    if f.dims == 2:
        tot += h * h * np.sum(np.abs(spectral_derivative(f.values, f.dx1, 0)) ** 2)
    return float(np.sqrt(tot * w))


def hdxn(f: GridFunction) -> GridFunction:
    """Centered-difference ``h D_{x_n}`` (zero on constant rows, exactly)."""
    v = f.values
    out = np.zeros_like(v)
    out[..., 1:-1] = (v[..., 2:] - v[..., :-2]) / (2.0 * f.dxn)
    return f.with_values(-1j * f.h * out)


@dataclass(frozen=True)
class DecayReport:
    kernel_decay: list
    kernel_rate: float
    image_identity: list


def decay_estimates(f: GridFunction, cutoff: Callable, t_values: Sequence[float]) -> DecayReport:
    """Model kernel decay and the image identity ``||chi_t Pi0 f||^2 = e^{-t} ||chi Pi0 f||^2``.

    ``cutoff(x', x_n)`` (or ``cutoff(x_n)`` in one dimension) must be negligible
    near the grid edge; ``chi_t(x) = chi(x', e^t x_n)``.
    """
    if f.dims == 2:
        X1, XN = np.meshgrid(f.x1, f.xn, indexing="ij")

        def chi(scale):
            return cutoff(X1, scale * XN)
    else:
        def chi(scale):
            return cutoff(scale * f.xn)
    edge = np.abs(chi(1.0))
    if edge[..., 0].max() > 1e-10 or edge[..., -1].max() > 1e-10:
        raise PreconditionError("cutoff is not supported well inside the grid")
    w = f.dxn * f.dx1
    P = model_projector(f)
    rest = f.with_values(f.values - P.values)
    norm_h1 = h1_norm(f, f.h)
    base = np.sum(np.abs(chi(1.0) * P.values) ** 2) * w
    kernel, image = [], []
    for t in t_values:
        Ut = model_propagator(rest, t)
        kernel.append((float(t), float(np.sqrt(np.sum(np.abs(chi(1.0) * Ut.values) ** 2) * w)) / norm_h1))
        lhs = np.sum(np.abs(chi(np.exp(t)) * P.values) ** 2) * w
        rhs = np.exp(-t) * base
        image.append((float(t), float(lhs), float(rhs), float(abs(lhs - rhs) / abs(rhs))))
    ts = np.array([k[0] for k in kernel])
    ys = np.log(np.array([k[1] for k in kernel]))
    rate = float(np.polyfit(ts, ys, 1)[0]) if ts.size >= 2 else float("nan")
    return DecayReport(kernel, rate, image)


# ---- Lambda^0 quantization (one dimension) ----------------------------------

def _frequencies(u: GridFunction):
    n = u.xn.size
    dy = u.dxn
    xi = 2 * np.pi * u.h * np.fft.fftfreq(n, d=dy)
    return xi, dy


def _forward(u: GridFunction, xi):
    """``u^(xi_k) = sum_l e^{-i y_l xi_k / h} u_l dy``."""
    y0 = u.xn[0]
    return u.dxn * np.exp(-1j * y0 * xi / u.h) * np.fft.fft(u.values)


def _adjoint_forward(w, u: GridFunction, xi):
    y0 = u.xn[0]
    n = u.xn.size
    return u.dxn * n * np.fft.ifft(np.exp(1j * y0 * xi / u.h) * w)


def _symbol_apply(a, x, xi, v, block=256, adjoint=False):
    out = np.empty(x.size if not adjoint else xi.size, dtype=complex)
    if not adjoint:
        for s in range(0, x.size, block):
            X, XI = np.meshgrid(x[s:s + block], xi, indexing="ij")
            out[s:s + block] = np.asarray(a(X, XI), complex) @ v
        return out
    out[:] = 0
    for s in range(0, x.size, block):
        X, XI = np.meshgrid(x[s:s + block], xi, indexing="ij")
        out += np.conj(np.asarray(a(X, XI), complex)).T @ v[s:s + block]
    return out


def lambda_quantize(a: Callable, u: GridFunction, check_decay: bool = True) -> GridFunction:
    """``Op(a) u (x) = (2 pi h)^{-1} iint e^{-i y xi / h} a(x, xi) u(y) dy dxi``.

    The ``y`` integral is a DFT; the ``xi`` integral is a rectangle rule on
    the DFT frequencies ``xi_k = 2 pi h k / (N dy)``.
    """
    if u.dims != 1:
        raise DomainError("quantization is one-dimensional")
    xi, dy = _frequencies(u)
    uh = _forward(u, xi)
    dxi = 2 * np.pi * u.h / (u.xn.size * dy)
    if check_decay:
        edge = np.argsort(np.abs(xi))[-2:]
        X, XI = np.meshgrid(u.xn, xi[edge], indexing="ij")
        contrib = np.abs(np.asarray(a(X, XI), complex)) * np.abs(uh[edge])
        scale = max(float(np.max(np.abs(uh))), 1e-300)
        if contrib.max() > DECAY_TOL * scale:
            raise AliasingRiskError("a(x, xi) u^(xi) does not decay at the frequency edge")
    out = _symbol_apply(a, u.xn, xi, uh) * dxi / (2 * np.pi * u.h)
    return u.with_values(out)


def quantization_norm(a: Callable, u_template: GridFunction, iters: int = 60,
                      rtol: float = 1e-8, seed: int = 0) -> float:
    """Operator norm of the discrete ``Op(a)`` on ``l^2`` by power iteration on ``M^H M``."""
    xi, dy = _frequencies(u_template)
    dxi = 2 * np.pi * u_template.h / (u_template.xn.size * dy)
    c = dxi / (2 * np.pi * u_template.h)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(u_template.xn.size) + 0j
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = c * _symbol_apply(a, u_template.xn, xi, _forward(u_template.with_values(v), xi))
        z = _adjoint_forward(c * _symbol_apply(a, u_template.xn, xi, w, adjoint=True), u_template, xi)
        nz = np.linalg.norm(z)
        new = float(np.sqrt(nz))
        v = z / nz
        if abs(new - est) <= rtol * new:
            return new
        est = new
    return est


# ---- identity suite -----------------------------------------------------------

@dataclass(frozen=True)
class CheckRow:
    name: str
    value: float
    tolerance: float
    passed: bool

    @property
    def status(self) -> str:
        return "pass" if self.passed else "fail"


def random_band_limited(rng, n: int = 512, L: float = 8.0, waves: int = 6,
                        kmax: float = 2.0, width: float = 1.0, h: float = 1.0) -> GridFunction:
    """Gaussian-windowed sum of ``waves`` random plane waves with ``|k| <= kmax``."""
    x = symmetric_axis(n // 2, 2 * L / n)
    X1, XN = np.meshgrid(x, x, indexing="ij")
    v = np.zeros(X1.shape, dtype=complex)
    for _ in range(waves):
        a, b = rng.uniform(-kmax, kmax, 2)
        c = rng.standard_normal() + 1j * rng.standard_normal()
        v += c * np.exp(1j * (a * X1 + b * XN))
    v *= np.exp(-(X1 ** 2 + XN ** 2) / (2 * width ** 2))
    return GridFunction(v, x, x, h)


def _gaussian_cutoff(a, b):
    return np.exp(-(a * a + b * b))


def _ulps(a: np.ndarray, b: np.ndarray) -> float:
    gap = np.spacing(np.maximum(np.abs(a), np.abs(b)))
    gap = np.where(gap > 0, gap, np.finfo(float).tiny)
    return float(np.max(np.abs(a - b) / gap)) if a.size else 0.0


def run_model_checks(seed: int = 0, count: int = 100, n: int = 512,
                     quant_h=(0.2, 0.1, 0.05, 0.025)) -> list:
    """Evaluate the model identities; one ``CheckRow`` per property."""
    rng = np.random.default_rng(seed)
    rows = []
    f = random_band_limited(rng, n)
    P = model_projector(f)
    rows.append(CheckRow("projector_idempotent_bitwise", float(np.sum(model_projector(P).values != P.values)),
                         0.0, bool(np.array_equal(model_projector(P).values, P.values))))
    bad = 0
    for t in (math.log(2.0), 1.0):
        lhs = model_propagator(P, t).values
        rhs = model_projector(model_propagator(f, t)).values
        bad += int(np.sum(lhs != rhs))
    rows.append(CheckRow("propagator_commutes_bitwise", float(bad), 0.0, bad == 0))

    off = np.arange(f.xn.size) != f.j0
    num = (f.values - P.values)[:, off]
    back = multiply_xn(model_xi(f)).values[:, off]
    mism = int(np.sum(back != num))
    rows.append(CheckRow("xi_identity_offaxis_bitwise", float(mism), 0.0, mism == 0))
    ulp = max(_ulps(back.real, num.real), _ulps(back.imag, num.imag))
    rows.append(CheckRow("xi_identity_offaxis_ulps", ulp, 1.0, ulp <= 1.0))

    worst = 0.0
    for _ in range(count):
        g = random_band_limited(rng, n)
        worst = max(worst, model_xi(g).l2() / h1_norm(g, 1.0))
    rows.append(CheckRow("hardy_ratio_max", worst, 2.0, worst <= 2.0))

    rep = decay_estimates(f, _gaussian_cutoff, (0.5, 1.0, 2.0))
    err = max(r[3] for r in rep.image_identity)
    rows.append(CheckRow("image_identity_relerr", err, 1e-5, err <= 1e-5))
    rate = decay_estimates(f, _gaussian_cutoff, (1.0, 2.0, 3.0, 4.0)).kernel_rate
    rows.append(CheckRow("kernel_decay_rate", rate, -0.95, rate <= -0.95))
    rows.append(CheckRow("kernel_decay_rate_vs_model", abs(rate + 1.5), 0.05, abs(rate + 1.5) <= 0.05))
    iso = abs(model_propagator(f, 0.5).l2() / f.l2() - 1.0)
    rows.append(CheckRow("propagator_isometry_relerr", iso, 1e-6, iso <= 1e-6))

    ann = float(np.max(np.abs(hdxn(P).values)))
    rows.append(CheckRow("hdxn_annihilates_projector", ann, 1e-12, ann <= 1e-12))
    ann2 = float(np.max(np.abs(model_projector(multiply_xn(f)).values)))
    rows.append(CheckRow("projector_annihilates_xn", ann2, 1e-12, ann2 <= 1e-12))

    def symbol(X, XI):
        return np.exp(-X * X - XI * XI) * (1.0 + 0.3j * XI)

    norms = []
    for h in quant_h:
        x = symmetric_axis(int(round(16.0 / h)), h / 4.0)
        norms.append(quantization_norm(symbol, GridFunction(np.zeros(x.size), x, None, h)))
    slope = float(np.polyfit(np.log(quant_h), np.log(norms), 1)[0])
    rows.append(CheckRow("quantization_norm_slope", slope, 0.1, abs(slope + 0.5) <= 0.1))
    h = 0.05
    x = symmetric_axis(512, h / 4.0)
    osc = 0.0
    for xi0 in (0.3, -0.5):
        u = GridFunction(np.exp(1j * x * xi0 / h), x, None, h)
        osc = max(osc, float(np.max(np.abs(lambda_quantize(symbol, u, check_decay=False).values
                                           - symbol(x, xi0)))))
    rows.append(CheckRow("oscillatory_testing", osc, 1e-6, osc <= 1e-6))
    return rows
