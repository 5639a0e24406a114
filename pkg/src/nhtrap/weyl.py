"""Band census, Weyl counts and resolvent scans in the resonance-free strips."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CoverageError, DomainError, NormUncertainError, PreconditionError
from .scaling import Box, Resonance, stack_resolvent_norm

COLLISION_NORM = 1e12
GAP_MARGIN = 0.05  # in units of h


@dataclass(frozen=True)
class BandSpec:
    """Spectral window for the first band.

    The band box is ``Im w in 1/2 [-(nu_max+eps) h, -(nu_min-eps) h]``; the
    resonance-free region is ``[-(nu_min-eps) h, 0]`` minus the open band
    interval, which splits into an upper and a lower gap.
    """

    re_window: tuple
    epsilon: float
    nu_min: float
    nu_max: float
    h: float

    def __post_init__(self):
        a, b = (float(v) for v in self.re_window)
        object.__setattr__(self, "re_window", (a, b))
        if not a < b:
            raise DomainError("re_window must be increasing")
        if not self.h > 0 or not self.epsilon > 0:
            raise DomainError("h and epsilon must be positive")
        if not 0 < self.nu_min <= self.nu_max:
            raise DomainError("need 0 < nu_min <= nu_max")
        lo, hi = self.band_im
        if not lo < hi < 0:
            raise DomainError("band box is empty; epsilon too large")
        if not self.gap_lower[0] < self.gap_lower[1]:
            raise DomainError("no lower gap: pinching fails for this epsilon")

    @property
    def band_im(self) -> tuple:
        h = self.h
        return (-0.5 * (self.nu_max + self.epsilon) * h, -0.5 * (self.nu_min - self.epsilon) * h)

    @property
    def band_box(self) -> Box:
        lo, hi = self.band_im
        return Box(self.re_window[0], self.re_window[1], lo, hi)

    @property
    def gap_upper(self) -> tuple:
        return (self.band_im[1], 0.0)

    @property
    def gap_lower(self) -> tuple:
        return (-(self.nu_min - self.epsilon) * self.h, self.band_im[0])

    def in_band(self, w: complex) -> bool:
        lo, hi = self.band_im
        a, b = self.re_window
        return a <= w.real < b and lo <= w.imag <= hi

    def in_gap(self, w: complex) -> bool:
        a, b = self.re_window
        if not a <= w.real < b:
            return False
        lo, hi = self.band_im
        return self.gap_lower[0] <= w.imag <= 0.0 and not lo < w.imag < hi

    def with_h(self, h: float) -> "BandSpec":
        return BandSpec(self.re_window, self.epsilon, self.nu_min, self.nu_max, h)


@dataclass(frozen=True)
class BandCensus:
    spec: BandSpec
    count: int
    weyl_prediction: float
    relative_error: float
    gap_violations: tuple
    h: float


def census(resonances: Sequence[Resonance], spec: BandSpec, volume: float, dim_n: int = 2) -> BandCensus:
    """Count band resonances (with multiplicity) against ``(2 pi h)^{1-n} volume``.

    The real window is closed on the left and open on the right.
    """
    if volume < 0:
        raise DomainError("volume must be non-negative")
    box = getattr(resonances, "box", None)
    if box is not None and resonances:
        need = spec.band_box
        gap = Box(need.re_min, need.re_max, spec.gap_lower[0], 0.0)
        if not box.covers(gap):
            raise CoverageError("resonance search box does not contain the band and gap regions")
    count = 0
    viol = []
    for r in resonances:
        w = complex(r.omega)
        if spec.in_band(w):
            count += int(r.multiplicity)
        elif spec.in_gap(w):
            viol.append(r)
    pred = (2 * math.pi * spec.h) ** (1 - dim_n) * volume
    rel = abs(count - pred) / max(pred, 1.0)
    return BandCensus(spec, count, float(pred), float(rel), tuple(viol), spec.h)


@dataclass(frozen=True)
class WeylFit:
    slope: float
    intercept: float
    per_h_errors: tuple
    excluded: tuple = field(default=())


def weyl_slope(censuses: Sequence[BandCensus]) -> WeylFit:
    """Least-squares slope of ``log count`` against ``log(1/h)``."""
    hs = sorted({c.h for c in censuses})
    if len(hs) < 4:
        raise PreconditionError("need at least four distinct h values")
    use = [c for c in censuses if c.count > 0]
    excluded = tuple((c.h, "count is zero") for c in censuses if c.count <= 0)
    if len({c.h for c in use}) < 2:
        raise PreconditionError("fewer than two nonzero counts")
    x = np.log([1.0 / c.h for c in use])
    y = np.log([float(c.count) for c in use])
    slope, intercept = np.polyfit(x, y, 1)
    rows = tuple(sorted(((c.h, c.relative_error) for c in censuses), reverse=True))
    return WeylFit(float(slope), float(intercept), rows, excluded)


@dataclass(frozen=True)
class GapSample:
    omega: complex
    norm: float
    h: float
    flagged: bool


@dataclass(frozen=True)
class GapScan:
    samples: tuple
    slopes: dict
    flagged: tuple


def gap_lines(spec: BandSpec, line_count: int) -> list:
    """``line_count`` imaginary parts per gap, in units of ``h``, away from the edges."""
    if line_count <= 0:
        return []
    h = spec.h
    out = []
    for lo, hi in (spec.gap_upper, spec.gap_lower):
        lo, hi = lo / h + GAP_MARGIN, hi / h - GAP_MARGIN
        if lo >= hi:
            continue
        out.extend(np.linspace(lo, hi, line_count + 2)[1:-1].tolist())
    return out


def gap_scan(op_builder: Callable, spec: BandSpec, line_count: int,
             h_values: Optional[Sequence[float]] = None, im_factors: Optional[Sequence[float]] = None,
             re_samples: int = 9) -> GapScan:
    """Resolvent norms on horizontal lines ``Im w = c h`` in the gap regions.

    ``op_builder(h)`` returns the operator stack at ``h``.  Lines are
    ``im_factors`` (in units of ``h``) when given, else ``gap_lines``.  For
    each line the per-``h`` maximum is fitted against ``1/h`` on log-log
    axes; points with norm above ``COLLISION_NORM`` are flagged and left out.
    """
    if line_count == 0 and im_factors is None:
        return GapScan((), {}, ())
    hs = list(h_values) if h_values is not None else [spec.h]
    factors = list(im_factors) if im_factors is not None else gap_lines(spec, line_count)
    for c in factors:
        w = complex(spec.re_window[0], c * spec.h)
        if not spec.in_gap(w):
            raise PreconditionError(f"line Im w = {c} h is outside the gap region")
        lo, hi = spec.band_im
        edges = (0.0, spec.gap_lower[0], lo, hi)
        if min(abs(c * spec.h - e) for e in edges) < GAP_MARGIN * spec.h - 1e-15:
            raise PreconditionError(f"line Im w = {c} h is within the edge margin")
    res = np.linspace(spec.re_window[0], spec.re_window[1], re_samples)
    samples = []
    for h in hs:
        ops = op_builder(h)
        for c in factors:
            for x in res:
                w = complex(x, c * h)
                try:
                    nrm = stack_resolvent_norm(ops, w)
                except (PreconditionError, NormUncertainError):
                    nrm = math.inf
                samples.append(GapSample(w, float(nrm), float(h), bool(nrm > COLLISION_NORM)))
    slopes = fit_gap_slopes(samples)
    return GapScan(tuple(samples), slopes, tuple(s for s in samples if s.flagged))


def fit_gap_slopes(samples: Sequence[GapSample]) -> dict:
    """Per-line log-log slope of the max unflagged norm against ``1/h``.

    Lines are keyed by ``Im w / h`` rounded to 1e-9.
    """
    per = {}
    for s in samples:
        if s.flagged:
            continue
        c = round(s.omega.imag / s.h, 9)
        key = (c, s.h)
        per[key] = max(per.get(key, 0.0), s.norm)
    slopes = {}
    for c in sorted({k[0] for k in per}):
        hs = sorted(h for (cc, h) in per if cc == c)
        if len(hs) < 2:
            slopes[float(c)] = float("nan")
            continue
        xs = [math.log(1.0 / h) for h in hs]
        ys = [math.log(per[(c, h)]) for h in hs]
        slopes[float(c)] = float(np.polyfit(xs, ys, 1)[0])
    return slopes
