"""Run configuration: a single strict JSON document.

Unknown keys are rejected with the dotted path of the offending entry, so a
typo never silently falls back to a default.  Every block is optional and
every field has a documented default; ``resolved()`` returns the fully
materialized dictionary that gets snapshotted next to the outputs.

Rates in the emitter block are angular (rad/ns, matching lifetime tables in
1/ns); frequencies on the sweep axis are GHz.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .emitter import EmitterParams
from .interferometer import (ConstantPhase, InterferometerConfig, LockedDriftPhase,
                             RandomWalkPhase, SinusoidPhase)


class ConfigError(ValueError):
    """Configuration rejected; message names the offending key path."""


@dataclass
class EmitterBlock:
    gamma_rad_ns: float = 12.3
    gamma_dp_rad_ns: float = 3.9
    coupling: str = "isotropic"
    beta: float = 1.0
    f0_ghz: float = 0.0
    phi0_rad: float = -0.25

    def to_params(self) -> EmitterParams:
        try:
            return EmitterParams(gamma=self.gamma_rad_ns, gamma_dp=self.gamma_dp_rad_ns,
                                 coupling=self.coupling, beta=self.beta,
                                 f0=self.f0_ghz, phi0=self.phi0_rad)
        except ValueError as exc:
            raise ConfigError(f"emitter: {exc}") from exc


@dataclass
class DriveBlock:
    omega_rad_ns: float = 0.0
    linear_response: bool = True


@dataclass
class EnvPhaseBlock:
    kind: str = "constant"        # constant | random_walk | sinusoid | locked_drift
    value_rad: float = 0.0        # constant
    sigma_rad: float = 0.05       # random_walk / locked_drift step
    amplitude_rad: float = 0.0    # sinusoid
    frequency_hz: float = 0.0     # sinusoid
    kp: float = 0.6               # locked_drift PID gains
    ki: float = 4.0
    kd: float = 0.0
    seed: int = 0

    def to_model(self):
        if self.kind == "constant":
            return ConstantPhase(self.value_rad)
        if self.kind == "random_walk":
            return RandomWalkPhase(self.sigma_rad, seed=self.seed)
        if self.kind == "sinusoid":
            return SinusoidPhase(self.amplitude_rad, self.frequency_hz)
        if self.kind == "locked_drift":
            return LockedDriftPhase(self.sigma_rad, kp=self.kp, ki=self.ki, kd=self.kd,
                                    seed=self.seed)
        raise ConfigError(f"interferometer.env_phase.kind: unknown kind {self.kind!r}")


@dataclass
class InterferometerBlock:
    delta_l_m: float = 2.78
    visibility: float = 0.65
    p_lo_cps: float = 1e6
    p_sig_cps: float = 1e4
    integration_time_s: float = 0.1
    dark_cps: float = 0.0
    env_phase: EnvPhaseBlock = field(default_factory=EnvPhaseBlock)

    def to_config(self) -> InterferometerConfig:
        try:
            return InterferometerConfig(
                delta_l=self.delta_l_m, visibility=self.visibility, p_lo=self.p_lo_cps,
                p_sig=self.p_sig_cps, integration_time=self.integration_time_s,
                dark_rate=self.dark_cps, phi_env=self.env_phase.to_model())
        except ValueError as exc:
            raise ConfigError(f"interferometer: {exc}") from exc


@dataclass
class SweepBlock:
    start_ghz: float = -15.0
    stop_ghz: float = 15.0
    points: int = 4501

    def grid(self):
        import numpy as np
        if self.points < 2:
            raise ConfigError("sweep.points: need at least 2 points")
        if self.stop_ghz <= self.start_ghz:
            raise ConfigError("sweep: stop_ghz must exceed start_ghz")
        return np.linspace(self.start_ghz, self.stop_ghz, self.points)


@dataclass
class NoiseBlock:
    shot_noise: bool = False
    seed: int = 0


@dataclass
class ExtractionBlock:
    window_periods: float = 3.0
    hop_periods: Optional[float] = None
    poly_order: int = 2
    weight_beta: float = 12.0
    delta_l_m: Optional[float] = None   # None -> FFT estimate from the off trace


@dataclass
class FitBlock:
    model: str = "two_dipole"           # two_dipole | saturation
    combine: str = "isolated"           # isolated | product
    intensity_from: str = "offset"      # offset | amplitude
    max_iter: int = 500
    init: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    dipole_windows_ghz: dict = field(default_factory=dict)  # {"1": [lo, hi], ...}
    powers: list = field(default_factory=list)              # saturation override


@dataclass
class ChiralScanBlock:
    beta_dirs: list = field(default_factory=lambda: [1.0, 0.9, 0.7, 0.5])
    omega_max_rad_ns: float = 12.0
    gamma_dp_max_rad_ns: float = 12.0
    points: int = 121


@dataclass
class RunConfig:
    emitter: EmitterBlock = field(default_factory=EmitterBlock)
    drive: DriveBlock = field(default_factory=DriveBlock)
    interferometer: InterferometerBlock = field(default_factory=InterferometerBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    noise: NoiseBlock = field(default_factory=NoiseBlock)
    extraction: ExtractionBlock = field(default_factory=ExtractionBlock)
    fit: FitBlock = field(default_factory=FitBlock)
    chiral_scan: ChiralScanBlock = field(default_factory=ChiralScanBlock)

    def resolved(self) -> dict:
        return asdict(self)


_BLOCKS = {f.name: f.type for f in fields(RunConfig)}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown key")
    kwargs = {}
    for name, fld in known.items():
        if name not in data:
            continue
        value = data[name]
        nested = {"env_phase": EnvPhaseBlock}.get(name)
        if nested is not None:
            kwargs[name] = _build(nested, value, f"{path}.{name}")
        else:
            kwargs[name] = _check_scalar(cls, fld, value, f"{path}.{name}")
    return cls(**kwargs)


def _check_scalar(cls, fld, value, path):
    want = fld.type
    if want in ("float", float) and isinstance(value, bool):
        raise ConfigError(f"{path}: expected a number, got a boolean")
    if want in ("float", float):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {type(value).__name__}")
        return float(value)
    if want in ("int", int):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{path}: expected an integer, got {type(value).__name__}")
        return value
    if want in ("bool", bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean, got {type(value).__name__}")
        return value
    if want in ("str", str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {type(value).__name__}")
        return value
    if want in ("dict",) or want is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
        return value
    if want in ("list",) or want is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        return value
    if "Optional[float]" in str(want):
        if value is None:
            return None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}: expected a number or null, got {type(value).__name__}")
        return float(value)
    return value


def load_config(source) -> RunConfig:
    """Load and validate a config from a path, JSON string, or dict."""
    if isinstance(source, RunConfig):
        return source
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        if path.exists():
            text = path.read_text(encoding="utf-8")
        else:
            text = str(source)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    for key in data:
        if key not in _BLOCKS:
            raise ConfigError(f"{key}: unknown key")
    kwargs = {}
    block_types = {
        "emitter": EmitterBlock, "drive": DriveBlock, "interferometer": InterferometerBlock,
        "sweep": SweepBlock, "noise": NoiseBlock, "extraction": ExtractionBlock,
        "fit": FitBlock, "chiral_scan": ChiralScanBlock,
    }
    for name, cls in block_types.items():
        if name in data:
            kwargs[name] = _build(cls, data[name], name)
    return RunConfig(**kwargs)
