"""Warped products ``dr^2 + cosh^2 r g~``: barriers, oracle, resonances, dynamics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import count
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.special import comb

from . import _flow_py
from .dynamics.system import HamiltonianSystem
from .errors import CapExceededError, DomainError, PreconditionError
from .scaling import Box, Resonance, ResonanceList, assemble_deformed, build_profile, extract_resonances
from .scaling.resonances import match_nearest, richardson

log = logging.getLogger(__name__)

MODE_CAP = 10 ** 4
MODE_MARGIN = 3.0  # in units of h


@dataclass(frozen=True)
class CrossSection:
    """Cross-section ``N`` with its Laplace spectrum.

    ``kind`` is ``"circle"`` (length ``L``), ``"sphere"`` (dimension ``d``) or
    ``"revolution"``: the torus of revolution ``ds^2 + (1 + beta cos s)^2 dphi^2``,
    available for dynamics only.
    """

    kind: str
    L: float = 2 * math.pi
    d: int = 1
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("circle", "sphere", "revolution"):
            raise DomainError(f"unknown cross-section {self.kind!r}")
        if self.kind == "circle" and not self.L > 0:
            raise DomainError("circle length must be positive")
        if self.kind == "sphere" and self.d < 1:
            raise DomainError("sphere dimension must be positive")
        if self.kind == "revolution" and not 0 <= self.beta < 1:
            raise DomainError("revolution profile needs 0 <= beta < 1")

    @property
    def dim(self) -> int:
        if self.kind == "circle":
            return 1
        if self.kind == "sphere":
            return self.d
        return 2

    def eigenvalues(self) -> Iterator[tuple]:
        """Lazily generated ``(lambda_k, multiplicity)`` in increasing order."""
        if self.kind == "revolution":
            raise DomainError("no closed-form spectrum for a surface of revolution")
        for k in count():
            yield self.eigenvalue(k)

    def eigenvalue(self, k: int) -> tuple:
        if self.kind == "circle":
            return (2 * math.pi * k / self.L) ** 2, (1 if k == 0 else 2)
        if self.kind == "sphere":
            d = self.d
            mult = int(comb(k + d, d, exact=True) - (comb(k + d - 2, d, exact=True) if k >= 2 else 0))
            return float(k * (k + d - 1)), mult
        raise DomainError("no closed-form spectrum for a surface of revolution")


@dataclass(frozen=True)
class WarpedModel:
    cross_section: CrossSection
    dim_n: int
    h: float
    scale_C: float = 1.0

    def __post_init__(self):
        if self.dim_n < 2:
            raise DomainError("dim_n must be at least 2")
        if self.dim_n != self.cross_section.dim + 1:
            raise DomainError("dim_n must equal the cross-section dimension plus one")
        if not self.h > 0:
            raise DomainError("h must be positive")
        if self.scale_C < 1:
            raise DomainError("scale_C must be at least 1")

    def scaled_eigenvalue(self, k: int) -> tuple:
        """Eigenvalue of the Laplacian of ``C^2 g~`` (divided by ``C^2``)."""
        lam, mult = self.cross_section.eigenvalue(k)
        return lam / self.scale_C ** 2, mult


@dataclass(frozen=True)
class Barrier:
    V0: float
    potential: Callable
    sub_barrier: bool
    lam: float


def effective_barrier(model: WarpedModel, lam: float) -> Barrier:
    """Reduced line barrier ``V0 sech^2 r`` for the mode with eigenvalue ``lam``.

    Conjugating by ``cosh^{(n-1)/2} r`` turns ``h^2 (Delta_g - (n-1)^2/4)`` on
    that mode into ``-h^2 d_r^2 + V0 sech^2 r`` with
    ``V0 = h^2 lam - h^2 (n-1)(n-3)/4``.
    """
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    n, h = model.dim_n, model.h
    V0 = h * h * lam - h * h * (n - 1) * (n - 3) / 4.0

    def potential(r, V0=V0):
        return V0 / np.cosh(r) ** 2

    sub = V0 <= h * h / 4.0
    if sub:
        log.info("mode lambda=%g is sub-barrier (V0=%g <= h^2/4)", lam, V0)
    return Barrier(float(V0), potential, bool(sub), float(lam))


def poschl_teller_oracle(V0: float, h: float, k_max: int, both_signs: bool = True) -> np.ndarray:
    """Poles ``+-sqrt(V0 - h^2/4) - i h (k + 1/2)`` for ``k = 0..k_max``.

    Empty when ``V0 <= h^2/4``.  Ordered by ``k`` with the ``+`` root first.
    """
    if k_max < 0:
        raise DomainError("k_max must be non-negative")
    if V0 <= h * h / 4.0:
        return np.zeros(0, dtype=complex)
    re = math.sqrt(V0 - h * h / 4.0)
    ks = np.arange(k_max + 1)
    im = -h * (ks + 0.5)
    if not both_signs:
        return re + 1j * im
    out = np.empty(2 * ks.size, dtype=complex)
    out[0::2] = re + 1j * im
    out[1::2] = -re + 1j * im
    return out


@dataclass(frozen=True)
class SolverSettings:
    theta: float = 0.5
    theta2: float = 0.65
    R: float = 0.6
    grid_max: float = 4.0
    N: int = 2000
    refine: bool = True


def barrier_resonances(V0: float, h: float, box, settings: SolverSettings = SolverSettings(),
                       mode: int = -1, multiplicity: int = 1) -> ResonanceList:
    """Complex-scaling resonances of ``-h^2 d^2 + V0 sech^2``.

    With ``settings.refine`` the computation is repeated on ``2N + 1`` nodes
    (halving the spacing) and each accepted resonance is replaced by its
    Richardson extrapolation.
    """
    box = Box.of(box)

    def potential(z):
        return V0 / np.cosh(z) ** 2

    def run(N, bx):
        ops = [assemble_deformed(build_profile(th, settings.R, settings.grid_max, N), potential, h,
                                 continuation=True)
               for th in (settings.theta, settings.theta2)]
        return extract_resonances(ops, bx, mode=mode, multiplicity=multiplicity), ops[0].profile.spacing

    coarse, dr1 = run(settings.N, box)
    if not settings.refine or not coarse:
        return coarse
    # widened so that a resonance near the box edge is still matched
    fine_box = Box(box.re_min - 0.01, box.re_max + 0.01, box.im_min - 0.01, box.im_max + 0.01)
    fine, dr2 = run(2 * settings.N + 1, fine_box)
    out = ResonanceList(box=box, diagnostics=dict(coarse.diagnostics, refined=True))
    fine_w = [r.omega for r in fine]
    for r in coarse:
        if not fine_w:
            out.append(r)
            continue
        wf = match_nearest(r.omega, fine_w)[0]
        ext = complex(richardson(r.omega, wf, dr1, dr2))
        out.append(Resonance(ext, ext * ext, r.mode, r.multiplicity, r.residual,
                             r.theta_drift, r.flagged))
    return out


def _modes_in_window(model: WarpedModel, re_lo: float, re_hi: float, cap: int):
    """Indices ``k`` with ``h sqrt(lambda_k)`` inside ``[re_lo, re_hi]``."""
    h = model.h
    ks = []
    for k in count():
        lam, mult = model.scaled_eigenvalue(k)
        val = h * math.sqrt(lam)
        if val > re_hi:
            break
        if val >= re_lo:
            ks.append(k)
            if len(ks) > cap:
                raise CapExceededError(f"more than {cap} modes contribute at h={h}")
    return ks


def model_resonances(model: WarpedModel, omega_box, use_solver: bool = False,
                     settings: Optional[SolverSettings] = None, cap: int = MODE_CAP,
                     margin: float = MODE_MARGIN) -> ResonanceList:
    """Labelled resonances of the warped product inside ``omega_box``."""
    box = Box.of(omega_box)
    h = model.h
    if model.cross_section.kind == "revolution":
        raise DomainError("resonances need a cross-section with a closed-form spectrum")
    out = ResonanceList(box=box, diagnostics={"sub_barrier_modes": [], "modes": 0})
    if box.im_min > 0 or box.re_max <= 0:
        return out
    ks = _modes_in_window(model, max(0.0, box.re_min - margin * h), box.re_max + margin * h, cap)
    out.diagnostics["modes"] = len(ks)
    kmax = max(0, int(math.ceil(-box.im_min / h)))
    settings = settings or SolverSettings()
    for k in ks:
        lam, mult = model.scaled_eigenvalue(k)
        bar = effective_barrier(model, lam)
        if bar.sub_barrier:
            out.diagnostics["sub_barrier_modes"].append(k)
        if use_solver:
            if bar.sub_barrier:
                continue
            found = barrier_resonances(bar.V0, h, box, settings, mode=k, multiplicity=mult)
            out.extend(found)
            continue
        for w in poschl_teller_oracle(bar.V0, h, kmax, both_signs=False):
            if box.contains(w):
                out.append(Resonance(complex(w), complex(w * w), k, mult, 0.0, 0.0))
    out.sort(key=lambda r: (r.omega.real, -r.omega.imag))
    return out


# ---- dynamics ---------------------------------------------------------------

@dataclass(frozen=True)
class ModelDynamics:
    """Hamiltonian system of the model with closed-form defining functions.

    ``phi_plus(z)`` and ``phi_minus(z)`` return ``(value, gradient)`` of
    ``xi_r -+ p tanh r``; ``c_plus``/``c_minus`` are ``1 +- (xi_r/p) tanh r``.
    """

    system: HamiltonianSystem
    phi_plus: Callable
    phi_minus: Callable
    c_plus: Callable
    c_minus: Callable
    r_index: int
    xr_index: int


def dynamics_for_model(model: WarpedModel, escape_inner: float = 4.0,
                       escape_outer: float = 6.0) -> ModelDynamics:
    cs = model.cross_section
    if cs.kind == "circle":
        # The angle is an arc-length coordinate; its period does not enter p.
        params = (_flow_py.CIRCLE, float(model.scale_C), 0.0, 0.0)
        m = 2
    elif cs.kind == "revolution":
        params = (_flow_py.TORUS, float(model.scale_C), float(cs.beta), 0.0)
        m = 3
    else:
        raise DomainError("dynamics need a circle or surface-of-revolution cross-section")
    xr = m  # index of xi_r in the phase vector

    def p(z):
        return _flow_py.warped_derivs(params, z, order=0)

    def grad(z):
        return _flow_py.warped_derivs(params, z, order=1)[1]

    def hess(z):
        return _flow_py.warped_derivs(params, z, order=2)[2]

    system = HamiltonianSystem(
        dim=m, p=p, grad_p=grad, hess_p=hess,
        escape_radius_inner=escape_inner, escape_radius_outer=escape_outer,
        energy_band=(0.5, 1.5), exit_coordinate=lambda z: float(z[0]),
        native=params, name=f"warped-{cs.kind}-C{model.scale_C:g}",
    )

    def make_phi(sign):
        def phi(z):
            z = np.asarray(z, float)
            val, g = _flow_py.warped_derivs(params, z, order=1)
            th = math.tanh(z[0])
            out = -sign * th * g
            out[0] += -sign * val / math.cosh(z[0]) ** 2
            out[xr] += 1.0
            return z[xr] - sign * val * th, out
        return phi

    def make_c(sign):
        def c(z):
            z = np.asarray(z, float)
            return 1.0 + sign * z[xr] / p(z) * math.tanh(z[0])
        return c

    return ModelDynamics(system, make_phi(1.0), make_phi(-1.0), make_c(1.0), make_c(-1.0), 0, xr)


def trapped_volume(model: WarpedModel, band, samples: int = 0, seed: int = 0) -> float:
    """Symplectic volume of ``K`` inside ``p^{-1}([a, b])``.

    Circle: ``2 L (b - a)`` in closed form.  Sphere ``S^d``: the shell
    ``{a <= |xi| <= b}`` in ``T*S^d`` has volume
    ``vol(S^d) vol(B^d) (b^d - a^d)``.  Lengths and momenta use the
    rescaled metric ``C^2 g~``.  With ``samples > 0`` the value is instead
    estimated by Monte Carlo (used as an independent check).
    """
    a, b = float(band[0]), float(band[1])
    if not 0 < a <= b:
        raise DomainError("band must satisfy 0 < a <= b")
    if a == b:
        return 0.0
    cs = model.cross_section
    C = model.scale_C
    if cs.kind == "circle":
        L = cs.L * C
        if samples:
            rng = np.random.default_rng(seed)
            xi = rng.uniform(-b, b, samples)
            return float(L * 2 * b * np.mean((np.abs(xi) >= a) & (np.abs(xi) <= b)))
        return 2.0 * L * (b - a)
    if cs.kind == "sphere":
        d = cs.d
        vol_sphere = 2 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2) * C ** d
        vol_ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
        return vol_sphere * vol_ball * (b ** d - a ** d)
    raise DomainError("volume needs a circle or sphere cross-section")


def operator_stack(model: WarpedModel, re_window, settings: Optional[SolverSettings] = None,
                   margin: float = MODE_MARGIN, cap: int = MODE_CAP) -> list:
    """Deformed line operators of the modes whose barrier tops fall near ``re_window``.

    The resolvent of the separated problem is block diagonal, so its norm is
    the maximum over this stack.
    """
    settings = settings or SolverSettings()
    h = model.h
    lo, hi = float(re_window[0]), float(re_window[1])
    profile = build_profile(settings.theta, settings.R, settings.grid_max, settings.N)
    ops = []
    for k in _modes_in_window(model, max(0.0, lo - margin * h), hi + margin * h, cap):
        bar = effective_barrier(model, model.scaled_eigenvalue(k)[0])

        def potential(z, V0=bar.V0):
            return V0 / np.cosh(z) ** 2

        ops.append(assemble_deformed(profile, potential, h, continuation=True))
    return ops
