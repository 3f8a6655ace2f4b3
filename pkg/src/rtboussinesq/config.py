"""Run configuration: TOML loading, defaults and field-level validation."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Optional

import tomli

from .params import PhysicalParams, SteadyProfile, ValidationError, make_profile


class ConfigParseError(ValueError):
    """The config file could not be parsed; the message names the location."""


@dataclass
class ParamsSection:
    mu: float = 1.0
    g: float = 1.0
    k0: float = 0.0
    k1: float = 0.0


@dataclass
class ResolutionSection:
    n_nodes: int = 96
    n_basis: int = 64
    nx: int = 64
    ny: int = 32
    m_modes: int = 24


@dataclass
class XiSection:
    n: int = 64
    lo: float = 0.1
    hi: float = 50.0


@dataclass
class TolerancesSection:
    root: float = 1e-10
    residual: float = 1e-6
    norm: float = 1e-8


@dataclass
class SynthesisSection:
    f_center: Optional[float] = None
    f_width: Optional[float] = None
    f_amplitude: float = 1.0
    times: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    length_factor: float = 8.0
    snapshots: bool = True


@dataclass
class SimulationSection:
    R: float = 1.0
    dt: float = 1e-3
    T: float = 1.0
    cfl: float = 0.5
    system: str = "full"
    mode: str = "nonlinear"
    integrator: str = "ifrk4"
    initial: str = "bump"
    bump_center: list = field(default_factory=lambda: [0.0, 0.5])
    bump_radius: float = 0.3
    bump_amplitude: float = 1.0
    mode_xi: Optional[float] = None
    amplitude: float = 1.0
    record_every: int = 10
    snapshot_times: list = field(default_factory=list)


@dataclass
class ExperimentSection:
    epsilon: list = field(default_factory=lambda: [1e-3, 1e-4, 1e-5])
    K: float = 1.0
    delta0: float = 1.0
    R: float = 6.0
    nx: int = 96
    ny: int = 24
    m: int = 96
    dt: float = 5e-3
    T: Optional[float] = None
    band_fraction: float = 0.9


@dataclass
class SweepSection:
    R_list: list = field(default_factory=lambda: [1.0, 2.0, 4.0])
    T: float = 1.0
    dt: float = 2e-3
    nx_per_unit: int = 24
    ny: int = 24
    m_per_unit: int = 24
    record_every: int = 5


@dataclass
class RunConfig:
    profile: dict
    params: ParamsSection = field(default_factory=ParamsSection)
    resolution: ResolutionSection = field(default_factory=ResolutionSection)
    xi: XiSection = field(default_factory=XiSection)
    tolerances: TolerancesSection = field(default_factory=TolerancesSection)
    synthesis: SynthesisSection = field(default_factory=SynthesisSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: str = "out"

    def physical(self) -> PhysicalParams:
        p = self.params
        return PhysicalParams(p.mu, p.g, p.k0, p.k1)

    def steady_profile(self) -> SteadyProfile:
        return make_profile(self.profile)

    def to_dict(self) -> dict:
        """Plain nested dict with None entries dropped (TOML has no null)."""
        return _drop_none(asdict(self))


def _drop_none(obj):
    if isinstance(obj, dict):
        return {k: _drop_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_drop_none(v) for v in obj]
    return obj


_SECTIONS = {f.name: f for f in fields(RunConfig)}

_POSITIVE = {
    "params.mu", "params.g", "xi.lo", "xi.hi", "tolerances.root", "tolerances.residual",
    "tolerances.norm", "synthesis.length_factor", "simulation.R", "simulation.dt", "simulation.cfl",
    "simulation.bump_radius", "experiment.K", "experiment.delta0", "experiment.R", "experiment.dt",
    "sweep.T", "sweep.dt", "synthesis.f_width", "simulation.mode_xi", "experiment.T",
}
_NON_NEGATIVE = {"simulation.T"}
_CHOICES = {
    "simulation.system": ("full", "perturbed"),
    "simulation.mode": ("linearized", "nonlinear"),
    "simulation.integrator": ("ifrk4", "rk4"),
    "simulation.initial": ("bump", "mode", "stokes", "zero"),
}
_MIN_INT = {
    "resolution.n_nodes": 8, "resolution.n_basis": 4, "resolution.nx": 16, "resolution.ny": 16,
    "resolution.m_modes": 1, "xi.n": 3, "experiment.nx": 16, "experiment.ny": 16, "experiment.m": 1,
    "sweep.nx_per_unit": 4, "sweep.ny": 16, "sweep.m_per_unit": 1, "simulation.record_every": 1,
    "sweep.record_every": 1,
}


def _coerce(path: str, value: Any, default: Any, annotation: str):
    if isinstance(value, bool) and not (isinstance(default, bool) or annotation == "bool"):
        raise ValidationError(f"{path}: expected a number, got a boolean")
    if isinstance(default, bool) or annotation == "bool":
        if not isinstance(value, bool):
            raise ValidationError(f"{path}: expected true or false")
        return value
    if isinstance(default, int) and annotation == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValidationError(f"{path}: expected an integer")
        return value
    if annotation in ("float", "Optional[float]"):
        if not isinstance(value, (int, float)):
            raise ValidationError(f"{path}: expected a number")
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(f"{path}: must be finite")
        return value
    if annotation == "str":
        if not isinstance(value, str):
            raise ValidationError(f"{path}: expected a string")
        return value
    if annotation == "list":
        if not isinstance(value, list):
            raise ValidationError(f"{path}: expected a list")
        return value
    return value


def _build_section(name: str, cls, raw: Any):
    if not isinstance(raw, dict):
        raise ValidationError(f"{name}: expected a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ValidationError(f"{name}.{unknown[0]}: unknown field")
    obj = cls()
    for key, value in raw.items():
        path = f"{name}.{key}"
        ann = known[key].type if isinstance(known[key].type, str) else known[key].type.__name__
        setattr(obj, key, _coerce(path, value, getattr(obj, key), ann))
    return obj


def _check_numbers(cfg: RunConfig):
    for sec_name, sec_field in _SECTIONS.items():
        sec = getattr(cfg, sec_name)
        if not is_dataclass(sec):
            continue
        for f in fields(sec):
            path = f"{sec_name}.{f.name}"
            v = getattr(sec, f.name)
            if v is None:
                continue
            if path in _POSITIVE and not v > 0:
                raise ValidationError(f"{path}: must be positive")
            if path in _NON_NEGATIVE and v < 0:
                raise ValidationError(f"{path}: must be non-negative")
            if path in _CHOICES and v not in _CHOICES[path]:
                raise ValidationError(f"{path}: must be one of {', '.join(_CHOICES[path])}")
            if path in _MIN_INT and v < _MIN_INT[path]:
                raise ValidationError(f"{path}: must be at least {_MIN_INT[path]}")


def validate(cfg: RunConfig) -> RunConfig:
    """Check the preconditions of every consumer; raises ValidationError."""
    _check_numbers(cfg)
    for name in ("k0", "k1"):
        if getattr(cfg.params, name) > 0:
            raise ValidationError(f"params.{name}: slip coefficients must be non-positive")
    try:
        cfg.physical()
    except ValidationError as exc:
        raise ValidationError(f"params: {exc}") from None
    try:
        cfg.steady_profile()
    except ValidationError as exc:
        raise ValidationError(f"profile: {exc}") from None
    res = cfg.resolution
    if not res.n_basis <= res.n_nodes - 4:
        raise ValidationError("resolution.n_basis: must not exceed n_nodes - 4")
    if cfg.xi.lo >= cfg.xi.hi:
        raise ValidationError("xi.lo: must be below xi.hi")
    syn = cfg.synthesis
    if (syn.f_center is None) != (syn.f_width is None):
        raise ValidationError("synthesis.f_center: f_center and f_width must be given together")
    if syn.f_center is not None and syn.f_center - syn.f_width <= 0:
        raise ValidationError("synthesis.f_center: support not admissible: must lie in ξ > 0")
    if any(not isinstance(t, (int, float)) or t < 0 for t in syn.times) or not syn.times:
        raise ValidationError("synthesis.times: must be a nonempty list of non-negative numbers")
    sim = cfg.simulation
    if len(sim.bump_center) != 2:
        raise ValidationError("simulation.bump_center: expected [x1, x2]")
    if sim.system == "full" and sim.initial == "mode":
        raise ValidationError("simulation.initial: a mode seed needs system = \"perturbed\"")
    if sim.T > 0 and abs(round(sim.T / sim.dt) * sim.dt - sim.T) > 1e-9 * max(1.0, sim.T):
        raise ValidationError("simulation.T: must be an integer multiple of simulation.dt")
    exp = cfg.experiment
    if not 0 < exp.band_fraction < 1:
        raise ValidationError("experiment.band_fraction: must lie in (0, 1)")
    if not exp.epsilon or any(not isinstance(e, (int, float)) or not 0 <= e < 1 for e in exp.epsilon):
        raise ValidationError("experiment.epsilon: values must lie in [0, 1)")
    if not cfg.sweep.R_list or any(not isinstance(r, (int, float)) or r <= 0 for r in cfg.sweep.R_list):
        raise ValidationError("sweep.R_list: must be a nonempty list of positive numbers")
    return cfg


def config_from_dict(raw: dict) -> RunConfig:
    """Build and validate a RunConfig from a parsed mapping."""
    if not isinstance(raw, dict):
        raise ValidationError("config: expected a table at top level")
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise ValidationError(f"{unknown[0]}: unknown section")
    if "profile" not in raw:
        raise ValidationError("profile: section is required")
    if not isinstance(raw["profile"], dict):
        raise ValidationError("profile: expected a table")
    kwargs = {"profile": dict(raw["profile"])}
    for name, f in _SECTIONS.items():
        if name in ("profile",) or name not in raw:
            continue
        if name == "output":
            if not isinstance(raw[name], str):
                raise ValidationError("output: expected a string")
            kwargs[name] = raw[name]
            continue
        kwargs[name] = _build_section(name, f.default_factory().__class__, raw[name])
    return validate(RunConfig(**kwargs))


def load_config(path) -> RunConfig:
    """Read a TOML config (or the ``config`` block of a JSON manifest)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if isinstance(raw, dict) and "config" in raw and "profile" not in raw:
            raw = raw["config"]
    else:
        try:
            raw = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigParseError(f"{path}: {exc}") from None
    return config_from_dict(raw)
