"""Pipeline configuration: one JSON document, units spelled out in the keys."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields

from . import kinematics as kin
from .fem.energy import MaterialParams
from .fem.solver import SimConfig
from .sensors import ForceCalibration, ImuNoiseModel, TaxelLayout


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FingerSpec:
    l1_m: float
    l2_m: float
    l3_m: float | None
    mcp_x_m: float
    mcp_y_m: float


@dataclass(frozen=True)
class HandSpec:
    palm_length_m: float = 0.08
    palm_width_m: float = 0.08
    palm_thickness_m: float = 0.02
    fingers: dict | None = None  # name -> FingerSpec; None uses the default hand

    def geometry(self) -> kin.HandGeometry:
        base = kin.HandGeometry.default(self.palm_length_m, self.palm_width_m)
        fingers = dict(base.fingers)
        for name, f in (self.fingers or {}).items():
            if name not in kin.FINGERS:
                raise ConfigError(f"hand.fingers: unknown finger {name!r}")
            fingers[name] = kin.FingerGeometry(f.l1_m, f.l2_m, f.l3_m, f.mcp_x_m, f.mcp_y_m)
        return kin.HandGeometry(fingers, self.palm_length_m, self.palm_width_m, self.palm_thickness_m)


@dataclass(frozen=True)
class TaxelSpec:
    palm: list = field(default_factory=lambda: list(TaxelLayout().palm))
    fingers: dict = field(default_factory=lambda: {k: list(v) for k, v in TaxelLayout().fingers.items()})

    def layout(self) -> TaxelLayout:
        return TaxelLayout(tuple(self.palm), {k: tuple(v) for k, v in self.fingers.items()})


@dataclass(frozen=True)
class ForceSpec:
    law: str = "logarithmic"
    log_c1_n: float = 0.569
    log_c2_per_v: float = 44.98
    power_a_n: float = -1.067
    power_b: float = -0.4798
    power_c_n: float = 3.244

    def calibration(self) -> ForceCalibration:
        return ForceCalibration(self.law, self.log_c1_n, self.log_c2_per_v, self.power_a_n, self.power_b,
                                self.power_c_n)


@dataclass(frozen=True)
class NoiseSpec:
    bias_deg: float = 0.0
    std_deg: float = 0.0
    drift_rate_deg_s: float = 0.0
    initial_drift_deg: float = 0.0

    def model(self) -> ImuNoiseModel:
        return ImuNoiseModel(self.bias_deg, self.std_deg, self.drift_rate_deg_s, self.initial_drift_deg)


@dataclass(frozen=True)
class StreamSpec:
    sample_rate_hz: float = 20.0
    calibration_frames: int = 10
    calibration_spread_deg: float = 5.0


@dataclass(frozen=True)
class GraspSpec:
    capsule_radius_m: float = 0.008
    debounce_frames: int = 0
    include_palm: bool = True


@dataclass(frozen=True)
class MaterialSpec:
    youngs_pa: float = 300e6
    poisson: float = 0.3
    density_kg_m3: float = 1000.0
    fracture_stretch: float = 1.1

    def params(self) -> MaterialParams:
        return MaterialParams(self.youngs_pa, self.poisson, self.density_kg_m3, self.fracture_stretch)


@dataclass(frozen=True)
class SimSpec:
    dt_s: float = 0.05
    dhat_rel: float = 1e-3
    eps_rel: float = 1e-6
    newton_tol_m_s: float = 1e-2
    max_newton: int = 100
    gravity_m_s2: list = field(default_factory=lambda: [0.0, 0.0, -9.81])
    snapshot_every: int = 10
    steps: int | None = None
    material: MaterialSpec = field(default_factory=MaterialSpec)

    def solver(self) -> SimConfig:
        return SimConfig(dt_s=self.dt_s, dhat_rel=self.dhat_rel, eps_rel=self.eps_rel,
                         newton_tol_m_s=self.newton_tol_m_s, max_newton=self.max_newton,
                         gravity_m_s2=tuple(self.gravity_m_s2), snapshot_every=self.snapshot_every)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    hand: HandSpec = field(default_factory=HandSpec)
    taxels: TaxelSpec = field(default_factory=TaxelSpec)
    force: ForceSpec = field(default_factory=ForceSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    stream: StreamSpec = field(default_factory=StreamSpec)
    grasp: GraspSpec = field(default_factory=GraspSpec)
    sim: SimSpec = field(default_factory=SimSpec)

    def validate(self) -> "PipelineConfig":
        """Build every derived object once so bad values fail at load time."""
        try:
            self.hand.geometry()
            self.taxels.layout()
            self.force.calibration()
            self.noise.model()
            self.sim.solver()
            self.sim.material.params()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        if not self.stream.sample_rate_hz > 0:
            raise ConfigError("stream.sample_rate_hz must be positive")
        if self.stream.calibration_frames < 10:
            raise ConfigError("stream.calibration_frames must be at least 10")
        if not self.grasp.capsule_radius_m > 0:
            raise ConfigError("grasp.capsule_radius_m must be positive")
        if self.grasp.debounce_frames < 0:
            raise ConfigError("grasp.debounce_frames must be non-negative")
        if self.sim.steps is not None and self.sim.steps < 1:
            raise ConfigError("sim.steps must be positive")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_NESTED = {
    (PipelineConfig, "hand"): HandSpec,
    (PipelineConfig, "taxels"): TaxelSpec,
    (PipelineConfig, "force"): ForceSpec,
    (PipelineConfig, "noise"): NoiseSpec,
    (PipelineConfig, "stream"): StreamSpec,
    (PipelineConfig, "grasp"): GraspSpec,
    (PipelineConfig, "sim"): SimSpec,
    (SimSpec, "material"): MaterialSpec,
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        path = f"{where}.{name}" if where else name
        if sub is not None:
            value = _build(sub, value, path)
        elif cls is HandSpec and name == "fingers" and value is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected a JSON object")
            value = {k: _build(FingerSpec, v, f"{path}.{k}") for k, v in value.items()}
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def config_from_dict(data: dict) -> PipelineConfig:
    return _build(PipelineConfig, data, "").validate()


def load_config(path) -> PipelineConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} ({exc.msg})") from exc
    return config_from_dict(data)
