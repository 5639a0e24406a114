"""Finite-horizon expansion rates, pinching checks and perturbation scans."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import PreconditionError, RateUncertainError
from .flow import _run, find_trapped_set
from .system import TRAPPED_BOTH, ExpansionRates, HamiltonianSystem, PhasePoint, TrappedSample

QR_INTERVAL = 1.0
MIN_HORIZON = 20.0
ORDER_CAP = 10 ** 6
MU_TOL = 1e-6
FIT_TOL = 0.10


def lyapunov_history(sys: HamiltonianSystem, z0, horizon: float, interval: float = QR_INTERVAL):
    """Cumulative log stretch factors along a trajectory.

    The tangent frame is advanced over ``interval`` time units, then
    re-orthonormalised by QR; the logs of ``|diag R|`` accumulate.  Returns
    ``(times, cumulative)`` with ``cumulative`` of shape ``(steps+1, 2m)``.
    """
    n = 2 * sys.dim
    steps = int(math.ceil(horizon / interval - 1e-12))
    z = np.asarray(z0, dtype=float).copy()
    Q = np.eye(n)
    times = np.zeros(steps + 1)
    cum = np.zeros((steps + 1, n))
    t = 0.0
    for k in range(steps):
        t_next = min(horizon, (k + 1) * interval)
        zt, Mt = _advance(sys, z, Q, t_next - t)
        Q, R = np.linalg.qr(Mt)
        d = np.diag(R)
        sgn = np.where(d < 0, -1.0, 1.0)
        Q = Q * sgn
        cum[k + 1] = cum[k] + np.log(np.abs(d))
        z = zt
        t = t_next
        times[k + 1] = t
    return times, cum


def _advance(sys, z, Q, dt):
    """Flow ``z`` for ``dt`` and push the frame ``Q`` forward."""
    ts, ys, Ms, escaped = _run(sys, z, 0.0, dt, True, 1e-10, 1e-10, False)
    if escaped:
        raise PreconditionError("sample escaped during rate computation; not trapped")
    return ys[-1], Ms[-1] @ Q


def _fit(times, cum):
    """Least-squares slopes over the trailing half of the history."""
    H = times[-1]
    sel = times >= 0.5 * H - 1e-12
    t = times[sel]
    Y = cum[sel]
    A = np.vstack((t, np.ones_like(t))).T
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - A @ coef
    rms = np.sqrt(np.mean(resid ** 2, axis=0))
    return coef[0], rms, t[-1] - t[0]


def sample_exponents(sys: HamiltonianSystem, sample, horizon: float,
                     interval: float = QR_INTERVAL) -> dict:
    """Fitted exponents at one trapped sample and the derived ``nu``, ``mu``."""
    z0 = sample.point.vector() if isinstance(sample, TrappedSample) else np.asarray(sample, float)
    times, cum = lyapunov_history(sys, z0, horizon, interval)
    slopes, rms, span = _fit(times, cum)
    # QR keeps invariant splittings of the initial frame, so order explicitly.
    order = np.argsort(-slopes, kind="stable")
    slopes, rms = slopes[order], rms[order]
    # Pair the extreme exponents: both the +nu and -nu rows contribute.
    nu = 0.5 * (slopes[0] - slopes[-1])
    nu_resid = 0.5 * math.hypot(rms[0], rms[-1])
    middle = slopes[1:-1]
    mu = float(np.max(np.abs(middle))) if middle.size else 0.0
    rel = nu_resid / (abs(nu) * span) if nu != 0 else math.inf
    return {
        "exponents": slopes,
        "nu": float(nu),
        "mu": max(mu, 0.0),
        "fit_residual": float(rel),
        "point": z0,
    }


def r_normal_order(nu_min: float, mu_max: float, cap: int = ORDER_CAP,
                   mu_tol: float = MU_TOL) -> int:
    if mu_max <= mu_tol:
        return int(cap)
    return int(min(cap, math.floor(nu_min / mu_max)))


def expansion_rates(sys: HamiltonianSystem, trapped: Sequence[TrappedSample], horizon: float,
                    interval: float = QR_INTERVAL, cap: int = ORDER_CAP,
                    mu_tol: float = MU_TOL) -> ExpansionRates:
    """Transverse and tangential expansion rates over a set of trapped samples.

    For each sample, the finite-time exponents of the linearised flow are
    fitted over the trailing half of ``[0, horizon]``.  The outermost pair
    gives the transverse rate ``nu``; the magnitudes of the remaining ones
    bound the tangential rate.
    """
    if horizon < MIN_HORIZON:
        raise PreconditionError(f"horizon must be at least {MIN_HORIZON}")
    if not trapped:
        raise PreconditionError("no trapped samples supplied")
    for s in trapped:
        if s.classification != TRAPPED_BOTH:
            raise PreconditionError("expansion_rates needs trapped_both samples")
    per = []
    for s in trapped:
        d = sample_exponents(sys, s, horizon, interval)
        if d["fit_residual"] > FIT_TOL:
            raise RateUncertainError("transverse exponent fit is too noisy", diagnostics=d)
        per.append(d)
    nus = [d["nu"] for d in per]
    nu_min, nu_max = float(min(nus)), float(max(nus))
    mu_max = float(max(d["mu"] for d in per))
    return ExpansionRates(
        nu_min=nu_min,
        nu_max=nu_max,
        mu_max=mu_max,
        horizon=float(horizon),
        sample_count=len(per),
        r_normal_order=r_normal_order(nu_min, mu_max, cap, mu_tol),
        per_sample=tuple((d["nu"], d["mu"]) for d in per),
    )


@dataclass(frozen=True)
class PinchingReport:
    pinched: bool
    r_normal_order: int
    margin: float


def check_pinching(rates: ExpansionRates, epsilon: float, cap: int = ORDER_CAP,
                   mu_tol: float = MU_TOL) -> PinchingReport:
    """Test ``nu_max + eps < 2 (nu_min - eps)`` and report the r-NH order."""
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    lhs = rates.nu_max + epsilon
    rhs = 2.0 * (rates.nu_min - epsilon)
    return PinchingReport(
        pinched=bool(lhs < rhs),
        r_normal_order=r_normal_order(rates.nu_min, rates.mu_max, cap, mu_tol),
        margin=float(rhs - lhs),
    )


@dataclass(frozen=True)
class Perturbation:
    """A one-parameter perturbation ``q(z, s)`` of a symbol.

    ``grad`` and ``hess`` give exact derivatives in ``z``; when omitted they
    are replaced by centered differences.  ``native_slot`` names the index
    of the compiled-kernel parameter tuple that carries ``s`` when the
    perturbation is built into the kernel.
    """

    value: Callable[[np.ndarray, float], float]
    grad: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    native_slot: Optional[int] = None

    def __call__(self, z, s):
        if isinstance(z, PhasePoint):
            z = z.vector()
        return self.value(z, s)


def _fd_grad(fun, z, step=1e-6):
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = step
        g[i] = (fun(z + e) - fun(z - e)) / (2 * step)
    return g


def _fd_hess(gfun, z, step=1e-5):
    n = z.size
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros_like(z)
        e[i] = step
        H[:, i] = (gfun(z + e) - gfun(z - e)) / (2 * step)
    return 0.5 * (H + H.T)


def perturbed_system(base: HamiltonianSystem, perturbation, s: float) -> HamiltonianSystem:
    """``p_s = p + q(., s)`` as a new system."""
    pert = perturbation if isinstance(perturbation, Perturbation) else Perturbation(perturbation)
    if pert.native_slot is not None and base.native is not None:
        params = list(base.native)
        params[pert.native_slot] = params[pert.native_slot] + s
        native = tuple(params)
    else:
        native = None

    def q(z):
        return pert.value(z, s)

    def p(z):
        return base.p(z) + q(z)

    if pert.grad is not None:
        def qg(z):
            return np.asarray(pert.grad(z, s), float)
    else:
        def qg(z):
            return _fd_grad(q, z)

    if pert.hess is not None:
        def qh(z):
            return np.asarray(pert.hess(z, s), float)
    else:
        def qh(z):
            return _fd_hess(qg, z)

    return replace(
        base,
        p=p,
        grad_p=lambda z: base.grad_p(z) + qg(z),
        hess_p=lambda z: base.hess_p(z) + qh(z),
        native=native,
        name=f"{base.name}+s={s:g}",
    )


@dataclass(frozen=True)
class ScanEntry:
    s: float
    rates: Optional[ExpansionRates]
    flagged: bool = False
    note: str = ""

    def __iter__(self):
        return iter((self.s, self.rates))


def perturbation_stability_scan(base: HamiltonianSystem, perturbation, s_values: Sequence[float],
                                trapped: Sequence[TrappedSample], horizon: float,
                                continuation_offset: float = 0.05) -> list:
    """Recompute rates along a perturbation family.

    The trapped set at each ``s`` is relocated by bisection between seeds
    displaced by ``+-continuation_offset`` in the first position coordinate
    from each base sample.  Entries where no trapped point survives are
    flagged and the scan continues.
    """
    svals = [float(s) for s in s_values]
    if 0.0 not in svals:
        raise PreconditionError("s_values must include 0")
    base_rates = expansion_rates(base, trapped, horizon)
    out = []
    for s in svals:
        if s == 0.0:
            out.append(ScanEntry(s, base_rates))
            continue
        ps = perturbed_system(base, perturbation, s)
        samples = []
        for smp in trapped:
            z = smp.point.vector()
            energy = ps.p(z)
            lo, hi = z.copy(), z.copy()
            lo[0] -= continuation_offset
            hi[0] += continuation_offset
            samples.extend(find_trapped_set(ps, energy, [lo, hi], smp.horizon))
        if not samples:
            out.append(ScanEntry(s, None, True, "continuation lost the trapped set"))
            continue
        try:
            out.append(ScanEntry(s, expansion_rates(ps, samples, horizon)))
        except (RateUncertainError, PreconditionError) as exc:
            out.append(ScanEntry(s, None, True, str(exc)))
    return out
