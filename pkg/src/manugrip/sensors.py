"""Glove frame stream, taxel force calibration, synthetic IMU noise and analysis channels."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kinematics as kin
from . import quat

N_TAXELS = 26
N_PALM_TAXELS = 16


class SensorError(ValueError):
    pass


class LayoutError(SensorError):
    pass


class UnsupportedLawError(SensorError):
    pass


class StreamParseError(SensorError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class TaxelLayout:
    """16 palm grid taxels (row-major 4x4) followed by proximal/distal pads per finger."""

    palm: tuple = tuple(range(N_PALM_TAXELS))
    fingers: dict = field(default_factory=lambda: {
        f: (N_PALM_TAXELS + 2 * i, N_PALM_TAXELS + 2 * i + 1) for i, f in enumerate(kin.FINGERS)
    })

    def __post_init__(self):
        ids = list(self.palm) + [t for pads in self.fingers.values() for t in pads]
        if len(self.palm) != N_PALM_TAXELS or len(ids) != N_TAXELS:
            raise LayoutError(f"layout must have {N_PALM_TAXELS} palm and {N_TAXELS} total taxels")
        if len(set(ids)) != N_TAXELS or not all(0 <= i < N_TAXELS for i in ids):
            raise LayoutError("taxel ids must be unique and in [0, 26)")

    def region(self, taxel: int) -> str:
        if taxel in self.palm:
            return "palm"
        for f, (prox, dist) in self.fingers.items():
            if taxel == prox:
                return f"{f}_proximal"
            if taxel == dist:
                return f"{f}_distal"
        raise LayoutError(f"unknown taxel {taxel}")


@dataclass(frozen=True)
class ForceCalibration:
    """Taxel force-voltage law; volts in, newtons out.

    logarithmic: F = c1 * ln(c2 * V); power: F = a * V**b + c.
    """

    law: str = "logarithmic"
    c1: float = 0.569
    c2: float = 44.98
    power_a: float = -1.067
    power_b: float = -0.4798
    power_c: float = 3.244

    def __post_init__(self):
        if self.law not in ("logarithmic", "power"):
            raise UnsupportedLawError(f"unknown force law {self.law!r}")
        if not (self.c1 > 0 and self.c2 > 0):
            raise SensorError("logarithmic coefficients must be positive")

    @property
    def zero_force_voltage(self) -> float:
        if self.law == "logarithmic":
            return 1.0 / self.c2
        return (-self.power_c / self.power_a) ** (1.0 / self.power_b)


def voltage_to_force(v, cal: ForceCalibration = ForceCalibration()):
    """Force in newtons, clamped below at 0. Non-positive voltages read 0 N."""
    v = np.asarray(v, dtype=float)
    pos = v > 0
    safe = np.where(pos, v, 1.0)
    if cal.law == "logarithmic":
        f = cal.c1 * np.log(cal.c2 * safe)
    else:
        f = cal.power_a * safe ** cal.power_b + cal.power_c
    f = np.where(pos, np.maximum(f, 0.0), 0.0)
    return float(f) if f.ndim == 0 else f


def below_threshold(v, cal: ForceCalibration = ForceCalibration()):
    """True where a reading is dead (v <= 0) or maps below zero force."""
    v = np.asarray(v, dtype=float)
    return (v <= 0) | (v < cal.zero_force_voltage)


def force_to_voltage(f, cal: ForceCalibration = ForceCalibration()):
    if cal.law != "logarithmic":
        raise UnsupportedLawError("only the logarithmic law has a closed-form inverse")
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise SensorError("force must be non-negative")
    v = np.exp(f / cal.c1) / cal.c2
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True)
class GloveFrame:
    t: float
    imu: np.ndarray  # (15, 4) w, x, y, z
    taxel: np.ndarray  # (26,) volts
    wrist: np.ndarray  # (7,) w, x, y, z, px, py, pz
    tool: np.ndarray | None = None

    def __post_init__(self):
        imu = np.asarray(self.imu, dtype=float)
        taxel = np.asarray(self.taxel, dtype=float)
        wrist = np.asarray(self.wrist, dtype=float)
        if imu.shape != (kin.N_IMUS, 4):
            raise kin.IncompleteFrameError(f"frame needs {kin.N_IMUS} IMU quaternions, got {imu.shape}")
        if taxel.shape != (N_TAXELS,):
            raise LayoutError(f"frame needs {N_TAXELS} taxel voltages, got {taxel.shape}")
        if wrist.shape != (7,):
            raise SensorError(f"wrist pose needs 7 numbers, got {wrist.shape}")
        if np.any(taxel < 0):
            raise SensorError("taxel voltages must be non-negative")
        object.__setattr__(self, "imu", quat.normalize(imu))
        object.__setattr__(self, "taxel", taxel)
        object.__setattr__(self, "wrist", np.concatenate([quat.normalize(wrist[:4]), wrist[4:]]))
        if self.tool is not None:
            tool = np.asarray(self.tool, dtype=float)
            if tool.shape != (7,):
                raise SensorError(f"tool pose needs 7 numbers, got {tool.shape}")
            object.__setattr__(self, "tool", tool)

    @property
    def wrist_pose(self) -> quat.Pose:
        return quat.Pose.from_array(self.wrist)

    def to_record(self) -> dict:
        rec = {
            "t": float(self.t),
            "imu": self.imu.tolist(),
            "taxel": self.taxel.tolist(),
            "wrist": self.wrist.tolist(),
        }
        if self.tool is not None:
            rec["tool"] = self.tool.tolist()
        return rec


def frame_from_record(rec: dict, line: int = 0) -> GloveFrame:
    for key in ("t", "imu", "taxel", "wrist"):
        if key not in rec:
            raise StreamParseError(line, f"missing field {key!r}")
    try:
        return GloveFrame(float(rec["t"]), np.asarray(rec["imu"], dtype=float),
                          np.asarray(rec["taxel"], dtype=float), np.asarray(rec["wrist"], dtype=float),
                          None if rec.get("tool") is None else np.asarray(rec["tool"], dtype=float))
    except (ValueError, TypeError) as exc:
        raise StreamParseError(line, str(exc)) from exc


def iter_stream(path) -> Iterator[GloveFrame]:
    """Frames from a JSON-lines stream file; blank lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StreamParseError(lineno, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(rec, dict):
                raise StreamParseError(lineno, "record is not a JSON object")
            yield frame_from_record(rec, lineno)


def read_stream(path, require_increasing=True) -> list[GloveFrame]:
    frames = []
    for i, fr in enumerate(iter_stream(path)):
        if require_increasing and frames and fr.t <= frames[-1].t:
            raise SensorError(f"timestamps must increase strictly (frame {i}: {fr.t} after {frames[-1].t})")
        frames.append(fr)
    return frames


def write_stream(frames: Iterable[GloveFrame], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for fr in frames:
            fh.write(json.dumps(fr.to_record(), separators=(",", ":")) + "\n")


@dataclass(frozen=True)
class ImuNoiseModel:
    """Per-joint angular error: constant bias plus zero-mean Gaussian, plus IMU drift."""

    bias_deg: float = 0.0
    std_deg: float = 0.0
    drift_rate_deg_s: float = 0.0
    initial_drift_deg: float = 0.0

    def __post_init__(self):
        if self.std_deg < 0:
            raise SensorError("noise std must be non-negative")

    @classmethod
    def single_imu_bench(cls):
        return cls(bias_deg=2.5, std_deg=1.7)


def synth_imu_stream(times: Sequence[float], true_angles, noise: ImuNoiseModel, seed: int,
                     wrist=None, taxels=None, tool=None) -> list[GloveFrame]:
    """Noisy glove frames for a joint-angle trajectory.

    ``true_angles`` is ``(T, 5, 4)`` radians, fingers in ``kin.FINGERS`` order,
    last axis ``(theta1, theta2, theta3, beta)``. Each flexion DoF is measured
    with error ``bias + N(0, std)`` relative to its parent IMU, so errors
    accumulate along the finger; each IMU additionally drifts about its own
    fixed random axis by ``initial + rate * t``.
    """
    times = np.asarray(times, dtype=float)
    true_angles = np.asarray(true_angles, dtype=float)
    T = len(times)
    if true_angles.shape != (T, 5, 4):
        raise SensorError(f"true_angles must have shape ({T}, 5, 4), got {true_angles.shape}")
    rng = np.random.default_rng(seed)
    drift_axes = rng.normal(size=(kin.N_IMUS, 3))
    drift_axes /= np.linalg.norm(drift_axes, axis=1, keepdims=True)
    err = np.deg2rad(noise.bias_deg + noise.std_deg * rng.normal(size=(T, 5, 3)))
    if wrist is None:
        wrist = np.tile(np.r_[quat.IDENTITY, 0.0, 0.0, 0.0], (T, 1))
    if taxels is None:
        taxels = np.full((T, N_TAXELS), ForceCalibration().zero_force_voltage)
    frames = []
    for k in range(T):
        palm = quat.normalize(wrist[k][:4])
        imu = np.empty((kin.N_IMUS, 4))
        imu[0] = palm
        for i, f in enumerate(kin.FINGERS):
            th1, th2, th3, beta = true_angles[k, i]
            e = err[k, i]
            measured = kin.FingerAngles(th1 + e[0], th2 + e[1], th3 + e[2], beta)
            for slot, q in zip(kin.IMU_SLOTS[f], kin.finger_imu_orientations(palm, measured, f == "thumb")):
                imu[slot] = q
        drift = np.deg2rad(noise.initial_drift_deg + noise.drift_rate_deg_s * times[k])
        if drift != 0.0:
            imu = quat.qmul(quat.from_axis_angle(drift_axes, np.full(kin.N_IMUS, drift)), imu)
        frames.append(GloveFrame(float(times[k]), imu, taxels[k], wrist[k],
                                 None if tool is None else tool[k]))
    return frames


def imu_rotation_errors(angles_deg: Sequence[float], trials: int, noise: ImuNoiseModel, seed: int):
    """Single-IMU turntable experiment: recovered-minus-commanded angle error (deg).

    The IMU is turned about its flexion axis by each commanded angle ``trials``
    times; the reading carries ``bias + N(0, std)``. The angle is recovered
    from the start/end orientations and compared modulo 360 degrees.
    Returns an array ``(len(angles_deg), trials)``.
    """
    rng = np.random.default_rng(seed)
    out = np.empty((len(angles_deg), trials))
    for i, a in enumerate(angles_deg):
        for j in range(trials):
            start = quat.random_unit(rng)
            measured = math.radians(a + noise.bias_deg + noise.std_deg * rng.normal())
            end = quat.qmul(start, kin.joint_rotation(measured))
            rec = math.degrees(kin.relative_joint_angle(start, end))
            out[i, j] = (rec - a + 180.0) % 360.0 - 180.0
    return out


@dataclass(frozen=True)
class AnalysisChannels:
    t: np.ndarray
    palm_force: np.ndarray
    thumb_tip_force: np.ndarray
    index_mcp_deg: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.palm_force) == len(self.thumb_tip_force) == len(self.index_mcp_deg) == n):
            raise SensorError("channels must have equal lengths")


def extract_channels(frames: Sequence[GloveFrame], layout: TaxelLayout = TaxelLayout(),
                     cal: ForceCalibration = ForceCalibration(), geometry=None) -> AnalysisChannels:
    """Palm mean force, thumb fingertip force and index-MCP flexion per frame."""
    n = len(frames)
    t = np.empty(n)
    palm = np.empty(n)
    thumb = np.empty(n)
    mcp = np.empty(n)
    palm_ids = np.asarray(layout.palm)
    thumb_tip = layout.fingers["thumb"][1]
    idx_slot = kin.IMU_SLOTS["index"][0]
    for k, fr in enumerate(frames):
        if fr.taxel.shape != (N_TAXELS,) or fr.imu.shape != (kin.N_IMUS, 4):
            raise LayoutError(f"frame {k} does not match the glove layout")
        forces = voltage_to_force(fr.taxel, cal)
        t[k] = fr.t
        palm[k] = float(np.mean(forces[palm_ids]))
        thumb[k] = float(forces[thumb_tip])
        flex, abd = kin.relative_joint_angle(fr.imu[0], fr.imu[idx_slot], with_abduction=True)
        flex = kin.clamp_joint_limits(kin.FingerAngles(theta1=flex, beta=abd)).theta1
        mcp[k] = math.degrees(flex)
    return AnalysisChannels(t, palm, thumb, mcp)
