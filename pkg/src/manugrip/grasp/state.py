"""Caging grasp state machine, attachment, contact logs and aggregation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..kinematics import N_IMUS
from ..quat import Pose
from .collision import CollisionPoint, caging_test
from .mesh import ObjectMesh


class GraspError(RuntimeError):
    pass


class Phase(str, Enum):
    FREE = "Free"
    TOUCHING = "Touching"
    CAGED = "Caged"


_OFF = (False,) * N_IMUS
_ALL_ON = (True,) * N_IMUS


@dataclass(frozen=True)
class GraspState:
    phase: Phase = Phase.FREE
    attachment: Pose | None = None  # object pose in the hand frame, only while caged
    contacts: tuple = ()
    haptics: tuple = _OFF
    caged_last: bool = False
    pending: tuple = (None, 0)  # (candidate phase, consecutive frames) for debounce

    def __post_init__(self):
        if (self.attachment is not None) != (self.phase is Phase.CAGED):
            raise GraspError("attachment must exist exactly while caged")


def _haptics(collisions, phase) -> tuple:
    if phase is Phase.CAGED:
        return _ALL_ON
    on = [False] * N_IMUS
    for c in collisions:
        on[c.phalanx] = True
    return tuple(on)


def _target(phase: Phase, has_contact: bool, caged: bool) -> Phase:
    if phase is Phase.FREE:
        if not has_contact:
            return Phase.FREE
        # touching is entered on contact and the cage check applies to the same frame
        return Phase.CAGED if caged else Phase.TOUCHING
    if phase is Phase.TOUCHING:
        if not has_contact:
            return Phase.FREE
        return Phase.CAGED if caged else Phase.TOUCHING
    if not has_contact or not caged:
        return Phase.FREE
    return Phase.CAGED


def step_grasp_state(prev: GraspState, collisions, mesh: ObjectMesh, hand_pose: Pose,
                     debounce: int = 0) -> GraspState:
    """Advance one frame. ``mesh`` carries the object's current world pose.

    A transition is taken once its condition has held for ``debounce + 1``
    consecutive frames.
    """
    collisions = tuple(collisions)
    has_contact = bool(collisions)
    caged = caging_test(collisions, mesh) if has_contact else False
    target = _target(prev.phase, has_contact, caged)

    if target is prev.phase:
        phase, pending = prev.phase, (None, 0)
    else:
        count = prev.pending[1] + 1 if prev.pending[0] is target else 1
        if count > debounce:
            phase, pending = target, (None, 0)
        else:
            phase, pending = prev.phase, (target, count)
    # a debounced cage must still rest on a true cage test this frame
    if phase is Phase.CAGED and not caged:
        phase = Phase.TOUCHING if has_contact else Phase.FREE

    if phase is Phase.CAGED:
        attachment = prev.attachment if prev.phase is Phase.CAGED else hand_pose.inverse() @ mesh.pose
    else:
        attachment = None
    return GraspState(phase, attachment, collisions, _haptics(collisions, phase), caged, pending)


def attach_follow(state: GraspState, hand_pose: Pose) -> Pose:
    if state.phase is not Phase.CAGED or state.attachment is None:
        raise GraspError(f"object can only follow the hand while caged (phase is {state.phase.value})")
    return hand_pose @ state.attachment


# contact logs ------------------------------------------------------------------------------

@dataclass
class ContactLog:
    """Timestamped grasp records for one trial."""

    records: list = field(default_factory=list)

    def append(self, t: float, state: GraspState, object_pose: Pose) -> None:
        self.records.append({
            "t": float(t),
            "phase": state.phase.value,
            "contacts": [c.to_record() for c in state.contacts],
            "haptics": [bool(h) for h in state.haptics],
            "object_pose": [float(x) for x in object_pose.as_array()],
        })

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")

    @classmethod
    def read(cls, path) -> "ContactLog":
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    for key in ("t", "phase", "contacts", "haptics", "object_pose"):
                        rec[key]
                except (json.JSONDecodeError, KeyError) as exc:
                    raise GraspError(f"{path}:{lineno}: bad contact record ({exc})") from exc
                records.append(rec)
        return cls(records)

    def local_contacts(self):
        """(phalanx, position in the object frame) for every logged contact."""
        out = []
        for rec in self.records:
            inv = Pose.from_array(rec["object_pose"]).inverse()
            for c in rec["contacts"]:
                out.append((int(c["phalanx"]), inv.apply(np.asarray(c["position"], dtype=float))))
        return out


@dataclass(frozen=True)
class ContactCluster:
    phalanx: int
    n: int
    mean: np.ndarray
    cov: np.ndarray
    degenerate: bool


@dataclass(frozen=True)
class ContactSummary:
    mean: np.ndarray
    clusters: dict

    def to_json(self) -> dict:
        return {
            "mean_m": [float(x) for x in self.mean],
            "clusters": {
                str(k): {"n": c.n, "mean_m": [float(x) for x in c.mean],
                         "cov_m2": [[float(x) for x in row] for row in c.cov],
                         "degenerate": c.degenerate}
                for k, c in sorted(self.clusters.items())
            },
        }


def aggregate_contacts(logs) -> ContactSummary:
    """Per-phalanx Gaussian fit of contacts pooled over trials, in the object frame."""
    logs = list(logs)
    if len(logs) < 2:
        raise GraspError("aggregation needs at least two contact logs")
    groups: dict[int, list] = {}
    for log in logs:
        for pid, p in log.local_contacts():
            groups.setdefault(pid, []).append(p)
    if not groups:
        raise GraspError("no contacts in any log")
    clusters = {}
    for pid in sorted(groups):
        pts = np.asarray(groups[pid])
        mean = pts.mean(axis=0)
        if len(pts) < 2:
            cov, degenerate = np.zeros((3, 3)), True
        else:
            cov = np.cov(pts, rowvar=False)
            cov = 0.5 * (cov + cov.T)
            degenerate = False
        clusters[pid] = ContactCluster(pid, len(pts), mean, cov, degenerate)
    allpts = np.concatenate([np.asarray(g) for _, g in sorted(groups.items())])
    return ContactSummary(allpts.mean(axis=0), clusters)

