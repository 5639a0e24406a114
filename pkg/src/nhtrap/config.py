"""Strict JSON experiment configuration."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .errors import ConfigError

SCHEMA_VERSION = 1
EXPERIMENTS = ("rates", "resonances", "weyl", "gaps", "model_checks", "transport", "perturbation")


@dataclass(frozen=True)
class CrossSectionConfig:
    kind: str = "circle"
    L: float = 2 * math.pi
    d: int = 1
    beta: float = 0.0


@dataclass(frozen=True)
class ModelConfig:
    cross_section: Optional[CrossSectionConfig] = None
    dim_n: int = 2
    scale_C: float = 1.0
    # a bare line barrier V0 sech^2 r instead of a warped product
    V0: Optional[float] = None


@dataclass(frozen=True)
class SolverConfig:
    theta: float = 0.5
    theta2: float = 0.65
    R: float = 0.6
    grid_max: float = 4.0
    N: int = 2000
    refine: bool = True
    use_solver: bool = False


@dataclass(frozen=True)
class SweepConfig:
    h_values: tuple = (1 / 32,)


@dataclass(frozen=True)
class BandConfig:
    re_window: tuple = (0.75, 1.25)
    epsilon: float = 0.1
    nu_min: float = 1.0
    nu_max: float = 1.0


@dataclass(frozen=True)
class DynamicsConfig:
    horizon: float = 60.0
    energy: float = 1.0
    s_values: tuple = (-0.02, -0.01, 0.0, 0.01, 0.02)


@dataclass(frozen=True)
class GapsConfig:
    line_count: int = 1
    im_factors: Optional[tuple] = (-0.25, -0.8)
    re_samples: int = 9


@dataclass(frozen=True)
class ResonanceBoxConfig:
    box: Optional[tuple] = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "nhtrap-output"
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class ModelChecksConfig:
    count: int = 100
    grid: int = 512


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    schema_version: int = SCHEMA_VERSION
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    band: BandConfig = field(default_factory=BandConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    gaps: GapsConfig = field(default_factory=GapsConfig)
    resonances: ResonanceBoxConfig = field(default_factory=ResonanceBoxConfig)
    model_checks: ModelChecksConfig = field(default_factory=ModelChecksConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return asdict(self)


_NESTED = {
    "model": ModelConfig, "solver": SolverConfig, "sweep": SweepConfig, "band": BandConfig,
    "dynamics": DynamicsConfig, "gaps": GapsConfig, "resonances": ResonanceBoxConfig,
    "model_checks": ModelChecksConfig, "output": OutputConfig, "cross_section": CrossSectionConfig,
}


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {path or 'config'}: {', '.join(unknown)}")
    kw = {}
    for key, value in data.items():
        if key in _NESTED and value is not None:
            kw[key] = _build(_NESTED[key], value, f"{path}.{key}" if path else key)
        elif isinstance(value, list):
            kw[key] = tuple(value)
        else:
            kw[key] = value
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _number(value, name, lo=None, hi=None, integer=False, strict_lo=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number")
    if integer and not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer")
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    if lo is not None and (value <= lo if strict_lo else value < lo):
        raise ConfigError(f"{name} out of range")
    if hi is not None and value > hi:
        raise ConfigError(f"{name} out of range")


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every numeric field against the preconditions of its consumer."""
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg.schema_version!r}")
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    _number(cfg.seed, "seed", 0, integer=True)
    m = cfg.model
    _number(m.dim_n, "model.dim_n", 2, integer=True)
    _number(m.scale_C, "model.scale_C", 1.0)
    if m.V0 is not None:
        _number(m.V0, "model.V0", 0.0, strict_lo=True)
        if cfg.experiment not in ("resonances", "gaps"):
            raise ConfigError("a bare barrier only feeds resonances")
    cs = m.cross_section
    if cs is not None:
        if cs.kind not in ("circle", "sphere", "revolution"):
            raise ConfigError("model.cross_section.kind must be circle, sphere or revolution")
        _number(cs.L, "model.cross_section.L", 0.0, strict_lo=True)
        _number(cs.d, "model.cross_section.d", 1, integer=True)
        _number(cs.beta, "model.cross_section.beta", 0.0, 0.99)
    s = cfg.solver
    _number(s.theta, "solver.theta", 0.0, math.pi / 2, strict_lo=True)
    _number(s.theta2, "solver.theta2", 0.0, math.pi / 2, strict_lo=True)
    if s.theta == s.theta2:
        raise ConfigError("solver.theta and solver.theta2 must differ")
    _number(s.R, "solver.R", 0.0, strict_lo=True)
    _number(s.grid_max, "solver.grid_max", 3 * s.R)
    _number(s.N, "solver.N", 200, integer=True)
    for flag in ("refine", "use_solver"):
        if not isinstance(getattr(s, flag), bool):
            raise ConfigError(f"solver.{flag} must be a boolean")
    if not cfg.sweep.h_values:
        raise ConfigError("sweep.h_values must be non-empty")
    for h in cfg.sweep.h_values:
        _number(h, "sweep.h_values", 0.0, 1.0, strict_lo=True)
    b = cfg.band
    if len(b.re_window) != 2:
        raise ConfigError("band.re_window needs two entries")
    for v in b.re_window:
        _number(v, "band.re_window", 0.0, strict_lo=True)
    if not b.re_window[0] < b.re_window[1]:
        raise ConfigError("band.re_window must be increasing")
    _number(b.epsilon, "band.epsilon", 0.0, strict_lo=True)
    _number(b.nu_min, "band.nu_min", 0.0, strict_lo=True)
    _number(b.nu_max, "band.nu_max", b.nu_min)
    if b.epsilon >= b.nu_min:
        raise ConfigError("band.epsilon must be below nu_min")
    d = cfg.dynamics
    _number(d.horizon, "dynamics.horizon", 20.0)
    _number(d.energy, "dynamics.energy", 0.0, strict_lo=True)
    for v in d.s_values:
        _number(v, "dynamics.s_values")
    g = cfg.gaps
    _number(g.line_count, "gaps.line_count", 0, integer=True)
    _number(g.re_samples, "gaps.re_samples", 1, integer=True)
    for v in g.im_factors or ():
        _number(v, "gaps.im_factors", hi=0.0)
    if cfg.resonances.box is not None:
        bx = cfg.resonances.box
        if len(bx) != 4:
            raise ConfigError("resonances.box needs [re_min, re_max, im_min, im_max]")
        for v in bx:
            _number(v, "resonances.box")
        if not (bx[0] < bx[1] and bx[2] < bx[3] <= 0):
            raise ConfigError("resonances.box must be ordered and in the closed lower half-plane")
    mc = cfg.model_checks
    _number(mc.count, "model_checks.count", 1, integer=True)
    _number(mc.grid, "model_checks.grid", 64, integer=True)
    if mc.grid % 2:
        raise ConfigError("model_checks.grid must be even")
    o = cfg.output
    if not isinstance(o.directory, str) or not o.directory:
        raise ConfigError("output.directory must be a non-empty string")
    if not o.formats or any(fmt not in ("csv", "json") for fmt in o.formats):
        raise ConfigError("output.formats must be a non-empty subset of csv, json")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(data, dict) or "experiment" not in data:
        raise ConfigError("config needs an 'experiment' field")
    return validate(_build(ExperimentConfig, data, ""))
