"""Hand forward kinematics, joint limits and flat-hand IMU calibration.

Frame conventions (fixed here, used by every other module):

* palm frame: +x from the palm centre toward the fingers, +z out of the
  grasping face of the palm, +y = z x x.
* every IMU frame coincides with the palm frame when the hand is held flat.
* abduction ``beta`` rotates about the MCP frame's z axis (the palm normal),
  flexion rotates about the z axis of the following D-H frame, which in the
  IMU/palm frame is the -y axis. Positive flexion curls toward +z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import quat

FINGERS = ("thumb", "index", "middle", "ring", "little")
N_IMUS = 15

# IMU slot order in a glove frame: palm, thumb x2, then 3 per finger.
IMU_SLOTS = {
    "thumb": (1, 2),
    "index": (3, 4, 5),
    "middle": (6, 7, 8),
    "ring": (9, 10, 11),
    "little": (12, 13, 14),
}

DEG = math.pi / 180.0
THETA1_MAX = 90.0 * DEG
THETA2_MAX = 110.0 * DEG
THETA3_MAX = 90.0 * DEG
BETA_MAX = 15.0 * DEG

ABDUCTION_AXIS = np.array([0.0, 0.0, 1.0])
FLEXION_AXIS = np.array([0.0, -1.0, 0.0])


class KinematicsError(ValueError):
    pass


class IncompleteFrameError(KinematicsError):
    pass


@dataclass(frozen=True)
class FingerGeometry:
    """Phalanx lengths and the palm-centre-to-MCP offset, metres.

    ``l3`` is ``None`` for the two-segment thumb.
    """

    l1: float
    l2: float
    l3: float | None
    dx: float
    dy: float

    def __post_init__(self):
        for name in ("l1", "l2", "l3"):
            v = getattr(self, name)
            if v is None and name == "l3":
                continue
            if not (0.0 < v < 0.2):
                raise KinematicsError(f"{name}={v!r} m outside (0, 0.2)")

    @property
    def is_thumb(self) -> bool:
        return self.l3 is None

    @property
    def lengths(self) -> tuple[float, ...]:
        return (self.l1, self.l2) if self.l3 is None else (self.l1, self.l2, self.l3)


@dataclass(frozen=True)
class FingerAngles:
    """Joint angles in radians. The thumb ignores ``theta3``."""

    theta1: float = 0.0
    theta2: float = 0.0
    theta3: float = 0.0
    beta: float = 0.0

    def as_array(self):
        return np.array([self.theta1, self.theta2, self.theta3, self.beta])

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class HandGeometry:
    fingers: dict = field(default_factory=dict)
    palm_length: float = 0.08
    palm_width: float = 0.08
    palm_thickness: float = 0.02

    def __post_init__(self):
        if tuple(sorted(self.fingers)) != tuple(sorted(FINGERS)):
            raise KinematicsError(f"hand needs exactly the fingers {FINGERS}")
        if not self.fingers["thumb"].is_thumb:
            raise KinematicsError("thumb must have two segments (l3=None)")
        for name in FINGERS[1:]:
            if self.fingers[name].is_thumb:
                raise KinematicsError(f"{name} must have three segments")

    @property
    def n_segments(self) -> int:
        return sum(len(self.fingers[f].lengths) for f in FINGERS)

    @classmethod
    def default(cls, palm_length=0.08, palm_width=0.08):
        hx = palm_length / 2
        hy = palm_width / 2
        fingers = {
            "thumb": FingerGeometry(0.035, 0.030, None, 0.0, -hy - 0.005),
            "index": FingerGeometry(0.045, 0.025, 0.020, hx, -0.75 * hy),
            "middle": FingerGeometry(0.045, 0.025, 0.020, hx, -0.25 * hy),
            "ring": FingerGeometry(0.045, 0.025, 0.020, hx, 0.25 * hy),
            "little": FingerGeometry(0.045, 0.025, 0.020, hx, 0.75 * hy),
        }
        return cls(fingers, palm_length, palm_width)


@dataclass(frozen=True)
class PhalanxPose:
    rotation: np.ndarray
    translation: np.ndarray


@dataclass(frozen=True)
class CalibrationReference:
    corrections: np.ndarray  # (15, 4)

    def __post_init__(self):
        c = np.asarray(self.corrections, dtype=float)
        if c.shape != (N_IMUS, 4):
            raise KinematicsError(f"calibration needs {N_IMUS} quaternions, got {c.shape}")
        object.__setattr__(self, "corrections", quat.normalize(c))

    def inverse(self) -> "CalibrationReference":
        return CalibrationReference(quat.conj(self.corrections))


def dh_transform(alpha_prev, a_prev, theta, d):
    """Homogeneous transform between consecutive frames (modified D-H)."""
    vals = (alpha_prev, a_prev, theta, d)
    if not all(math.isfinite(float(v)) for v in vals):
        raise KinematicsError(f"non-finite D-H parameter in {vals}")
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha_prev), math.sin(alpha_prev)
    return np.array([
        [ct, -st, 0.0, a_prev],
        [st * ca, ct * ca, -sa, -sa * d],
        [st * sa, ct * sa, ca, ca * d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def dh_rows(geometry: FingerGeometry, angles: FingerAngles):
    """(alpha, a, theta, d) per link, thumb uses the first three rows."""
    rows = [
        (0.0, 0.0, angles.beta, 0.0),
        (math.pi / 2, geometry.l1, angles.theta1, 0.0),
        (0.0, geometry.l2, angles.theta2, 0.0),
    ]
    if not geometry.is_thumb:
        rows.append((0.0, geometry.l3, angles.theta3, 0.0))
    return rows


def _translation(x, y, z=0.0):
    T = np.eye(4)
    T[:3, 3] = (x, y, z)
    return T


def finger_frames(geometry: FingerGeometry, angles: FingerAngles):
    """Cumulative frame transforms in the palm frame, MCP frame first."""
    T = _translation(geometry.dx, geometry.dy)
    frames = []
    for row in dh_rows(geometry, angles):
        T = T @ dh_transform(*row)
        frames.append(T)
    return frames


def finger_fk(geometry: FingerGeometry, angles: FingerAngles) -> list[PhalanxPose]:
    """Phalanx poses (proximal, [middle,] distal) in the palm frame.

    The last pose's origin is the fingertip.
    """
    out = []
    for T in finger_frames(geometry, angles)[1:]:
        out.append(PhalanxPose(quat.from_matrix(T[:3, :3]), T[:3, 3].copy()))
    return out


def fingertip(geometry: FingerGeometry, angles: FingerAngles):
    return finger_frames(geometry, angles)[-1][:3, 3].copy()


def mcp_position(geometry: FingerGeometry):
    return np.array([geometry.dx, geometry.dy, 0.0])


def clamp_joint_limits(angles: FingerAngles) -> FingerAngles:
    return FingerAngles(
        theta1=min(max(angles.theta1, 0.0), THETA1_MAX),
        theta2=min(max(angles.theta2, 0.0), THETA2_MAX),
        theta3=min(max(angles.theta3, 0.0), THETA3_MAX),
        beta=min(max(angles.beta, -BETA_MAX), BETA_MAX),
    )


def clamp_array(a):
    """Vectorised clamp for arrays whose last axis is (theta1, theta2, theta3, beta)."""
    lo = np.array([0.0, 0.0, 0.0, -BETA_MAX])
    hi = np.array([THETA1_MAX, THETA2_MAX, THETA3_MAX, BETA_MAX])
    return np.minimum(np.maximum(np.asarray(a, dtype=float), lo), hi)


def joint_rotation(flexion, abduction=0.0):
    """Relative child-in-parent rotation for a joint: abduction, then flexion."""
    qf = quat.from_axis_angle(FLEXION_AXIS, flexion)
    if abduction == 0.0:
        return qf
    return quat.qmul(quat.from_axis_angle(ABDUCTION_AXIS, abduction), qf)


def relative_joint_angle(parent, child, with_abduction=False):
    """Joint angle(s) from two IMU orientations.

    Returns the flexion angle, or ``(flexion, abduction)`` when
    ``with_abduction`` (MCP joints). The relative rotation is decomposed as
    abduction about z followed by flexion about -y.
    """
    rel = quat.qmul(quat.conj(quat.normalize(parent)), quat.normalize(child))
    R = quat.to_matrix(rel)
    if with_abduction:
        # the y column is untouched by flexion, so abduction stays defined at 90 deg flexion
        flex = math.atan2(R[2, 0], R[2, 2])
        abd = math.atan2(-R[0, 1], R[1, 1])
        return flex, abd
    return math.atan2(R[2, 0], R[0, 0])


def finger_imu_orientations(palm, angles: FingerAngles, thumb=False):
    """World orientations of a finger's IMUs given the palm orientation."""
    q = quat.qmul(palm, joint_rotation(angles.theta1, angles.beta))
    out = [q]
    flex = (angles.theta2,) if thumb else (angles.theta2, angles.theta3)
    for th in flex:
        q = quat.qmul(q, joint_rotation(th))
        out.append(q)
    return out


def hand_angles_from_imus(imu) -> dict[str, FingerAngles]:
    """Unclamped joint angles for every finger from 15 IMU orientations."""
    imu = np.asarray(imu, dtype=float)
    if imu.shape != (N_IMUS, 4):
        raise IncompleteFrameError(f"expected {N_IMUS} IMU quaternions, got shape {imu.shape}")
    palm = imu[0]
    out = {}
    for name in FINGERS:
        slots = IMU_SLOTS[name]
        th1, beta = relative_joint_angle(palm, imu[slots[0]], with_abduction=True)
        th2 = relative_joint_angle(imu[slots[0]], imu[slots[1]])
        th3 = relative_joint_angle(imu[slots[1]], imu[slots[2]]) if len(slots) == 3 else 0.0
        out[name] = FingerAngles(th1, th2, th3, beta)
    return out


def build_calibration(flat_frame) -> CalibrationReference:
    """Per-IMU correction that maps the recorded flat-hand orientations to identity."""
    imu = np.asarray(getattr(flat_frame, "imu", flat_frame), dtype=float)
    if imu.shape != (N_IMUS, 4) or not np.all(np.isfinite(imu)):
        raise IncompleteFrameError(f"flat frame needs {N_IMUS} finite IMU quaternions")
    return CalibrationReference(quat.conj(quat.normalize(imu)))


def apply_calibration(ref: CalibrationReference, raw):
    """Corrected copy of a glove frame (or a bare (15, 4) IMU array)."""
    imu = np.asarray(getattr(raw, "imu", raw), dtype=float)
    if imu.shape != (N_IMUS, 4):
        raise IncompleteFrameError(f"layout mismatch: expected {N_IMUS} IMUs, got {imu.shape[0]}")
    corrected = quat.normalize(quat.qmul(ref.corrections, imu))
    if hasattr(raw, "imu"):
        return replace(raw, imu=corrected)
    return corrected


@dataclass(frozen=True)
class HandState:
    """Clamped joint angles plus phalanx poses and the wrist pose."""

    angles: dict
    phalanges: dict
    wrist: quat.Pose

    def fingertips_world(self) -> dict:
        return {f: self.wrist.apply(self.phalanges[f][-1].translation) for f in FINGERS}


def hand_state(geometry: HandGeometry, angles: dict, wrist: quat.Pose | None = None) -> HandState:
    wrist = wrist or quat.Pose.identity()
    clamped = {f: clamp_joint_limits(angles[f]) for f in FINGERS}
    poses = {f: finger_fk(geometry.fingers[f], clamped[f]) for f in FINGERS}
    return HandState(clamped, poses, wrist)


def phalanx_segments(geometry: HandGeometry, state: HandState) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """(phalanx id, start, end) per segment in the world frame.

    Phalanx ids follow the IMU slot order (1..14); 0 is the palm.
    """
    out = []
    for f in FINGERS:
        start = mcp_position(geometry.fingers[f])
        for slot, pose in zip(IMU_SLOTS[f], state.phalanges[f]):
            end = pose.translation
            out.append((slot, state.wrist.apply(start), state.wrist.apply(end)))
            start = end
    return out


def angles_to_array(angles: dict) -> np.ndarray:
    return np.stack([angles[f].as_array() for f in FINGERS])


def array_to_angles(a: Sequence) -> dict:
    return {f: FingerAngles.from_array(a[i]) for i, f in enumerate(FINGERS)}
