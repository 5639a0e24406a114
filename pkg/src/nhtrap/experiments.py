"""Experiment runners: compose the library into result tables.

Each runner takes an ``ExperimentConfig`` and a ``Sink``; tables are handed
to the sink as soon as they are complete so that a later failure still
leaves the finished ones behind.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .config import ExperimentConfig
from .dynamics import (
    Perturbation,
    check_pinching,
    expansion_rates,
    find_trapped_set,
    perturbation_stability_scan,
    transport_residual,
)
from .errors import PreconditionError
from .model import run_model_checks
from .scaling import Box, assemble_deformed, build_profile
from .warped import (
    CrossSection,
    SolverSettings,
    WarpedModel,
    barrier_resonances,
    dynamics_for_model,
    model_resonances,
    operator_stack,
    trapped_volume,
)
from .weyl import BandSpec, census, fit_gap_slopes, gap_scan, weyl_slope

RESONANCE_COLUMNS = ("re_omega", "im_omega", "mode", "multiplicity", "residual", "theta_drift", "h")
CENSUS_COLUMNS = ("h", "count", "prediction", "relative_error")
RATES_COLUMNS = ("nu_min", "nu_max", "mu_max", "horizon")
GAPSCAN_COLUMNS = ("re_omega", "im_omega", "norm", "h", "flagged")
RESULT_COLUMNS = ("experiment", "quantity", "h", "value", "status")


class Sink:
    """Ordered collection of named tables plus the summary rows."""

    def __init__(self):
        self.tables = {}
        self.results = []

    def table(self, name: str, columns, rows):
        self.tables[name] = (tuple(columns), list(rows))

    def result(self, experiment, quantity, h, value, status=""):
        self.results.append((experiment, quantity, h, value, status))


def _settings(cfg: ExperimentConfig) -> SolverSettings:
    s = cfg.solver
    return SolverSettings(s.theta, s.theta2, s.R, s.grid_max, s.N, s.refine)


def _model(cfg: ExperimentConfig, h: float) -> WarpedModel:
    m = cfg.model
    cs = m.cross_section
    if cs is None:
        raise PreconditionError("experiment needs model.cross_section")
    return WarpedModel(CrossSection(cs.kind, cs.L, cs.d, cs.beta), m.dim_n, h, m.scale_C)


def _map(fn: Callable, items, threads: int):
    """Order-preserving map, threaded when ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---- dynamics -------------------------------------------------------------------

def trapped_samples(model: WarpedModel, energy: float, horizon: float, count: int = 3):
    """Trapped samples on the neck ``r = 0`` found by bisection between mirrored seeds.

    On the circle the seeds differ in the angle; on the surface of revolution
    they sit on the minimal parallel ``s = pi`` with ``xi_s = 0``.
    """
    dyn = dynamics_for_model(model)
    sys = dyn.system
    C = model.scale_C
    seeds = []
    for j in range(count):
        ang = 2 * math.pi * j / count
        for r in (-0.5, 0.5):
            if model.cross_section.kind == "circle":
                z = np.array([r, ang, -0.5 * math.copysign(1.0, r), C * energy])
            else:
                a = 1.0 + model.cross_section.beta * math.cos(math.pi)
                z = np.array([r, math.pi, ang, -0.5 * math.copysign(1.0, r), 0.0, a * C * energy])
            seeds.append(z)
    found = []
    for j in range(count):
        found.extend(find_trapped_set(sys, energy, seeds[2 * j:2 * j + 2], horizon))
    if not found:
        raise PreconditionError("no trapped samples located")
    return dyn, found


def run_rates(cfg: ExperimentConfig, sink: Sink, threads: int = 1):
    model = _model(cfg, cfg.sweep.h_values[0])
    dyn, samples = trapped_samples(model, cfg.dynamics.energy, cfg.dynamics.horizon)
    rates = expansion_rates(dyn.system, samples, cfg.dynamics.horizon)
    sink.table("rates", RATES_COLUMNS, [(rates.nu_min, rates.nu_max, rates.mu_max, rates.horizon)])
    pin = check_pinching(rates, cfg.band.epsilon)
    for name, value in (("nu_min", rates.nu_min), ("nu_max", rates.nu_max),
                        ("mu_max", rates.mu_max), ("r_normal_order", rates.r_normal_order),
                        ("samples", rates.sample_count), ("pinching_margin", pin.margin)):
        sink.result("rates", name, "", value)
    sink.result("rates", "pinched", "", int(pin.pinched), "pass" if pin.pinched else "fail")
    return rates


def run_perturbation(cfg: ExperimentConfig, sink: Sink, threads: int = 1):
    model = _model(cfg, cfg.sweep.h_values[0])
    if model.cross_section.kind != "circle":
        raise PreconditionError("the perturbation family is defined on the circle model")
    dyn, samples = trapped_samples(model, cfg.dynamics.energy, cfg.dynamics.horizon)

    def value(z, s):
        return s * math.sin(z[1]) / math.cosh(z[0])

    def grad(z, s):
        g = np.zeros(4)
        sech, th = 1 / math.cosh(z[0]), math.tanh(z[0])
        g[0] = -s * math.sin(z[1]) * sech * th
        g[1] = s * math.cos(z[1]) * sech
        return g

    def hess(z, s):
        H = np.zeros((4, 4))
        sech, th = 1 / math.cosh(z[0]), math.tanh(z[0])
        sn, cs = math.sin(z[1]), math.cos(z[1])
        H[0, 0] = s * sn * sech * (th * th - sech * sech)
        H[0, 1] = H[1, 0] = -s * cs * sech * th
        H[1, 1] = -s * sn * sech
        return H

    pert = Perturbation(value, grad, hess, native_slot=3)
    scan = perturbation_stability_scan(dyn.system, pert, cfg.dynamics.s_values, samples,
                                       cfg.dynamics.horizon)
    rows = []
    for e in scan:
        r = e.rates
        nan = float("nan")
        rows.append((e.s, r.nu_min if r else nan, r.nu_max if r else nan,
                     r.mu_max if r else nan, e.flagged))
    sink.table("perturbation", ("s", "nu_min", "nu_max", "mu_max", "flagged"), rows)
    sink.result("perturbation", "flagged_entries", "", sum(1 for e in scan if e.flagged))
    return scan


def run_transport(cfg: ExperimentConfig, sink: Sink, threads: int = 1):
    model = _model(cfg, cfg.sweep.h_values[0])
    if model.cross_section.kind != "circle":
        raise PreconditionError("the transport check runs on the circle model")
    dyn = dynamics_for_model(model)
    E = cfg.dynamics.energy
    C = model.scale_C
    rows = []
    horizon = min(cfg.dynamics.horizon, 20.0)
    for sign, r0, f in (("+", 1.0, lambda z: dyn.phi_minus(z)[0]),
                        ("-", -1.0, lambda z: dyn.phi_plus(z)[0])):
        # xi_r = +-p tanh r with p = E puts the point on Gamma_+-
        s = 1.0 if sign == "+" else -1.0
        z = np.array([r0, 0.3, s * E * math.tanh(r0), C * E])
        for t, hpa, fz, res in transport_residual(dyn.system, sign, f, z, horizon):
            rows.append((sign, t, hpa, fz, res))
    worst = max(r[4] for r in rows)
    sink.table("transport", ("sign", "t", "hp_a", "f", "residual"), rows)
    sink.result("transport", "max_residual", "", worst, "pass" if worst <= 1e-4 else "fail")
    return rows


# ---- spectral ---------------------------------------------------------------------

def _default_box(cfg: ExperimentConfig, h: float) -> Box:
    if cfg.resonances.box is not None:
        return Box(*cfg.resonances.box)
    b = cfg.band
    lo = -(b.nu_min - b.epsilon) * h - 0.05 * h
    if cfg.model.V0 is not None:
        top = math.sqrt(cfg.model.V0)
        return Box(0.5 * top, 1.5 * top, min(lo, -2.0 * h), 0.0)
    return Box(b.re_window[0], b.re_window[1], lo, 0.0)


def _resonances_at(cfg: ExperimentConfig, h: float):
    box = _default_box(cfg, h)
    if cfg.model.V0 is not None:
        return barrier_resonances(cfg.model.V0, h, box, _settings(cfg))
    return model_resonances(_model(cfg, h), box, use_solver=cfg.solver.use_solver,
                            settings=_settings(cfg))


def run_resonances(cfg: ExperimentConfig, sink: Sink, threads: int = 1):
    hs = list(cfg.sweep.h_values)
    lists = _map(lambda h: _resonances_at(cfg, h), hs, threads)
    rows = []
    for h, res in zip(hs, lists):
        for r in res:
            rows.append((r.omega.real, r.omega.imag, r.mode, r.multiplicity, r.residual,
                         r.theta_drift, h))
        sink.result("resonances", "count", h, len(res))
    sink.table("resonances", RESONANCE_COLUMNS, rows)
    return lists


def _band(cfg: ExperimentConfig, h: float) -> BandSpec:
    b = cfg.band
    return BandSpec(tuple(b.re_window), b.epsilon, b.nu_min, b.nu_max, h)


def run_weyl(cfg: ExperimentConfig, sink: Sink, threads: int = 1):
    hs = list(cfg.sweep.h_values)
    dim = cfg.model.dim_n

    def one(h):
        model = _model(cfg, h)
        res = _resonances_at(cfg, h)
        vol = trapped_volume(model, cfg.band.re_window, seed=cfg.seed)
        return res, census(res, _band(cfg, h), vol, dim)

    out = _map(one, hs, threads)
    censuses = [c for _, c in out]
    sink.table("census", CENSUS_COLUMNS,
               [(c.h, c.count, c.weyl_prediction, c.relative_error) for c in censuses])
    res_rows = []
    for h, (res, c) in zip(hs, out):
        for r in res:
            res_rows.append((r.omega.real, r.omega.imag, r.mode, r.multiplicity, r.residual,
                             r.theta_drift, h))
        tol = 2.0 / max(c.weyl_prediction, 1.0) + 0.02
        sink.result("weyl", "relative_error", h, c.relative_error,
                    "pass" if c.relative_error <= tol else "fail")
        sink.result("weyl", "gap_violations", h, len(c.gap_violations),
                    "pass" if not c.gap_violations else "fail")
    sink.table("resonances", RESONANCE_COLUMNS, res_rows)
    if len(set(hs)) >= 4:
        fit = weyl_slope(censuses)
        expected = dim - 1
        sink.result("weyl", "slope", "", fit.slope,
                    "pass" if abs(fit.slope - expected) <= 0.05 else "fail")
    return censuses


def run_gaps(cfg: ExperimentConfig, sink: Sink, threads: int = 1):
    hs = list(cfg.sweep.h_values)
    spec = _band(cfg, hs[0])
    settings = _settings(cfg)

    def builder(h):
        if cfg.model.V0 is not None:
            prof = build_profile(settings.theta, settings.R, settings.grid_max, settings.N)
            V0 = cfg.model.V0
            return [assemble_deformed(prof, lambda z: V0 / np.cosh(z) ** 2, h, continuation=True)]
        return operator_stack(_model(cfg, h), cfg.band.re_window, settings)

    g = cfg.gaps
    factors = list(g.im_factors) if g.im_factors is not None else None
    scans = _map(lambda h: gap_scan(builder, spec, g.line_count, [h], factors, g.re_samples),
                 hs, threads)
    samples = [s for sc in scans for s in sc.samples]
    sink.table("gapscan", GAPSCAN_COLUMNS,
               [(s.omega.real, s.omega.imag, s.norm, s.h, s.flagged) for s in samples])
    slopes = fit_gap_slopes(samples)
    for c, slope in sorted(slopes.items()):
        ok = math.isfinite(slope) and slope <= 2.3
        sink.result("gaps", f"slope_im_{c:g}h", "", slope, "pass" if ok else "fail")
    sink.result("gaps", "flagged", "", sum(1 for s in samples if s.flagged))
    return samples, slopes


def run_model_checks_experiment(cfg: ExperimentConfig, sink: Sink, threads: int = 1):
    rows = run_model_checks(seed=cfg.seed, count=cfg.model_checks.count, n=cfg.model_checks.grid)
    sink.table("model_checks", ("check", "value", "tolerance", "status"),
               [(r.name, r.value, r.tolerance, r.status) for r in rows])
    for r in rows:
        sink.result("model_checks", r.name, "", r.value, r.status)
    return rows


RUNNERS = {
    "rates": run_rates,
    "resonances": run_resonances,
    "weyl": run_weyl,
    "gaps": run_gaps,
    "model_checks": run_model_checks_experiment,
    "transport": run_transport,
    "perturbation": run_perturbation,
}
