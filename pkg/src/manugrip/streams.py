"""Synthetic glove recordings for bottle-opening and pick-and-place motions.

Every scenario opens with a flat-hand window so that it can be calibrated.
Joint targets are blended with a smoothstep between keyframes.
"""
from __future__ import annotations

import math

import numpy as np

from . import kinematics as kin
from . import quat
from .grasp.mesh import ObjectMesh, box_mesh
from .sensors import N_TAXELS, ForceCalibration, ImuNoiseModel, TaxelLayout, force_to_voltage, synth_imu_stream

SYNTH_SCENARIOS = ("flat-hand", "twist-lid", "press-lid", "pinch-lid", "pick-place")
FLAT_FRAMES = 20
PALM_DOWN = np.array([0.0, 1.0, 0.0, 0.0])  # half turn about x: the grasping face looks down
PICK_HEIGHT_M = 0.1


class ScenarioError(ValueError):
    pass


def _smooth(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


class _Timeline:
    """Piecewise keyframed joint angles, wrist pose and taxel forces."""

    def __init__(self, layout: TaxelLayout, wrist_q=quat.IDENTITY):
        self.layout = layout
        self.angles = [np.zeros((5, 4))]
        self.wrist = [np.r_[wrist_q, 0.0, 0.0, 0.0]]
        self.forces = [np.zeros(N_TAXELS)]

    def hold(self, frames):
        for _ in range(frames):
            self.angles.append(self.angles[-1].copy())
            self.wrist.append(self.wrist[-1].copy())
            self.forces.append(self.forces[-1].copy())

    def move(self, frames, angles=None, wrist=None, forces=None):
        a0, w0, f0 = self.angles[-1], self.wrist[-1], self.forces[-1]
        a1 = a0 if angles is None else angles
        w1 = w0 if wrist is None else wrist
        f1 = f0 if forces is None else forces
        for k in range(1, frames + 1):
            s = float(_smooth(k / frames))
            self.angles.append(a0 + s * (a1 - a0))
            q = quat.normalize(w0[:4] + s * (w1[:4] - w0[:4])) if not np.allclose(w0[:4], w1[:4]) else w0[:4]
            self.wrist.append(np.r_[q, w0[4:] + s * (w1[4:] - w0[4:])])
            self.forces.append(f0 + s * (f1 - f0))

    def force_vector(self, palm=0.0, **pads):
        """Taxel forces (N): ``palm`` on all 16 palm taxels, ``<finger>_<pad>=N`` on finger pads."""
        f = np.zeros(N_TAXELS)
        f[list(self.layout.palm)] = palm
        for key, val in pads.items():
            finger, pad = key.rsplit("_", 1)
            f[self.layout.fingers[finger][0 if pad == "proximal" else 1]] = val
        return f

    def arrays(self):
        return np.array(self.angles), np.array(self.wrist), np.array(self.forces)


def _pose(th1=0.0, th2=0.0, th3=0.0, beta=0.0):
    return np.deg2rad([th1, th2, th3, beta])


def _hand(thumb, others):
    """(5, 4) radians from a thumb and a shared finger pose (degrees)."""
    out = np.zeros((5, 4))
    out[0] = _pose(*thumb)
    for i in range(1, 5):
        out[i] = _pose(*others)
    return out


def _flat_hand(tl):
    tl.hold(39)


def _twist_lid(tl):
    tl.hold(FLAT_FRAMES - 1)
    grip = _hand((30, 30), (50, 30, 20))
    f = tl.force_vector(palm=0.3, thumb_distal=3.0, index_distal=2.5, middle_distal=1.5, ring_distal=1.5,
                        little_distal=1.0)
    tl.move(10, angles=grip, forces=f)
    w = tl.wrist[-1].copy()
    for sign in (1, -1, 1):
        twisted = np.r_[quat.from_axis_angle([1.0, 0.0, 0.0], math.radians(30.0 * sign)), w[4:]]
        tl.move(10, wrist=twisted)
    tl.move(10, wrist=w)
    tl.move(10, angles=np.zeros((5, 4)), forces=np.zeros(N_TAXELS))
    tl.hold(5)


def _press_lid(tl):
    tl.hold(FLAT_FRAMES - 1)
    press = _hand((5, 5), (5, 3, 2))
    tl.move(10, angles=press, forces=tl.force_vector(palm=6.0, thumb_distal=0.05))
    tl.hold(40)
    tl.move(10, angles=np.zeros((5, 4)), forces=np.zeros(N_TAXELS))
    tl.hold(5)


def _pinch_lid(tl):
    tl.hold(FLAT_FRAMES - 1)
    pinch = _hand((40, 30), (50, 40, 20))
    tl.move(10, angles=pinch, forces=tl.force_vector(thumb_distal=4.0, index_distal=4.0, middle_distal=1.0))
    w = tl.wrist[-1].copy()
    for sign in (1, -1):
        tl.move(10, wrist=np.r_[quat.from_axis_angle([1.0, 0.0, 0.0], math.radians(20.0 * sign)), w[4:]])
    tl.move(10, wrist=w)
    tl.hold(10)
    tl.move(10, angles=np.zeros((5, 4)), forces=np.zeros(N_TAXELS))
    tl.hold(5)


def pick_place_object() -> ObjectMesh:
    """Flat box the pick-and-place hand hooks over its +x edge (world frame, identity pose).

    With the palm facing down and theta1 at 90 deg the middle phalanges hang
    at x = 0.085 m and press 2 mm into the +x face; bending theta2 to 90 deg
    tucks the distal phalanges 2 mm under the bottom face.
    """
    h = PICK_HEIGHT_M
    return box_mesh((0.079, 0.08, 0.007), center=(0.0395, 0.0, h - 0.0155), divisions=2)


def _pick_place(tl):
    h = PICK_HEIGHT_M
    start = np.r_[PALM_DOWN, 0.15, 0.0, h]
    tl.wrist[0] = start
    tl.hold(FLAT_FRAMES - 1)
    hang = _hand((0, 0), (90, 0, 0))
    tl.move(10, angles=hang)
    tl.move(30, wrist=np.r_[PALM_DOWN, 0.0, 0.0, h])
    grip = _hand((0, 0), (90, 90, 0))
    tl.move(10, angles=grip, forces=tl.force_vector(index_distal=2.0, middle_distal=2.0, ring_distal=2.0,
                                                    little_distal=1.5))
    tl.move(20, wrist=np.r_[PALM_DOWN, 0.0, 0.05, h + 0.05])
    tl.hold(5)
    tl.move(10, angles=hang, forces=np.zeros(N_TAXELS))
    tl.move(10, angles=np.zeros((5, 4)))
    tl.move(10, wrist=np.r_[PALM_DOWN, 0.0, 0.05, h + 0.12])


_BUILDERS = {
    "flat-hand": (_flat_hand, quat.IDENTITY),
    "twist-lid": (_twist_lid, quat.IDENTITY),
    "press-lid": (_press_lid, quat.IDENTITY),
    "pinch-lid": (_pinch_lid, quat.IDENTITY),
    "pick-place": (_pick_place, PALM_DOWN),
}


def scenario_arrays(name: str, layout: TaxelLayout = TaxelLayout()):
    """``(true_angles (T,5,4) rad, wrist (T,7), taxel forces (T,26) N)``."""
    if name not in _BUILDERS:
        raise ScenarioError(f"unknown scenario {name!r}; expected one of {', '.join(SYNTH_SCENARIOS)}")
    build, q0 = _BUILDERS[name]
    tl = _Timeline(layout, q0)
    build(tl)
    return tl.arrays()


def synthesize(name: str, rate_hz: float = 20.0, noise: ImuNoiseModel = ImuNoiseModel(), seed: int = 0,
               layout: TaxelLayout = TaxelLayout(), cal: ForceCalibration = ForceCalibration()):
    angles, wrist, forces = scenario_arrays(name, layout)
    times = np.arange(len(angles)) / float(rate_hz)
    volts = force_to_voltage(forces, cal)
    return synth_imu_stream(times, kin.clamp_array(angles), noise, seed, wrist=wrist, taxels=volts)
