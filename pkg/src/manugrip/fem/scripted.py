"""Kinematically scripted bodies driven by pose keyframes."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..quat import Pose, normalize


class TrajectoryError(ValueError):
    pass


def slerp(q0, q1, s):
    q0, q1 = normalize(q0), normalize(q1)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1, dot = -q1, -dot
    if dot > 0.9995:
        return normalize(q0 + s * (q1 - q0))
    theta = np.arccos(dot)
    return (np.sin((1 - s) * theta) * q0 + np.sin(s * theta) * q1) / np.sin(theta)


@dataclass(frozen=True, eq=False)
class ScriptedBody:
    """Surface mesh (local frame) following piecewise-linear/slerp keyframes.

    ``role`` is "tool" for bodies whose contact counts toward the pressure
    metric and "support" for passive fixtures such as a table.
    """

    body_id: int
    vertices: np.ndarray
    triangles: np.ndarray
    times: np.ndarray
    poses: np.ndarray  # (k, 7) [w, x, y, z, px, py, pz]
    role: str = "tool"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        poses = np.asarray(self.poses, dtype=float).reshape(-1, 7)
        if len(times) == 0 or len(times) != len(poses):
            raise TrajectoryError(f"body {self.body_id}: need matching, non-empty times and poses")
        if np.any(np.diff(times) <= 0):
            raise TrajectoryError(f"body {self.body_id}: pose timestamps must increase")
        if self.role not in ("tool", "support"):
            raise TrajectoryError(f"unknown body role {self.role!r}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "vertices", np.ascontiguousarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.ascontiguousarray(self.triangles, dtype=np.int64))

    @classmethod
    def static(cls, body_id, vertices, triangles, role="support"):
        return cls(body_id, vertices, triangles, np.array([0.0]), np.array([[1, 0, 0, 0, 0, 0, 0.0]]), role)

    def covers(self, t0, t1) -> bool:
        if len(self.times) == 1:
            return True
        return self.times[0] <= t0 + 1e-12 and self.times[-1] >= t1 - 1e-12

    def pose_at(self, t: float) -> Pose:
        times, poses = self.times, self.poses
        if len(times) == 1:
            return Pose.from_array(poses[0])
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise TrajectoryError(f"body {self.body_id}: t={t!r} outside trajectory [{times[0]!r}, {times[-1]!r}]")
        k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        s = float(np.clip((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0))
        q = slerp(poses[k, :4], poses[k + 1, :4], s)
        p = (1 - s) * poses[k, 4:] + s * poses[k + 1, 4:]
        return Pose(q, p)

    def world_vertices(self, t: float):
        return self.pose_at(t).apply(self.vertices)


def read_trajectories(path) -> dict:
    """JSON lines ``{t, body_id, pose}`` grouped by body: ``{id: (times, poses)}``."""
    raw: dict[int, list] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                t, bid, pose = float(rec["t"]), int(rec["body_id"]), [float(v) for v in rec["pose"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise TrajectoryError(f"{path}:{lineno}: bad trajectory record ({exc})") from exc
            if len(pose) != 7:
                raise TrajectoryError(f"{path}:{lineno}: pose needs 7 numbers")
            raw.setdefault(bid, []).append((t, pose))
    out = {}
    for bid, rows in sorted(raw.items()):
        times = np.array([r[0] for r in rows])
        if np.any(np.diff(times) <= 0):
            raise TrajectoryError(f"{path}: body {bid} timestamps are not strictly increasing")
        out[bid] = (times, np.array([r[1] for r in rows]))
    return out


def write_trajectories(path, bodies) -> None:
    rows = []
    for b in bodies:
        for t, pose in zip(b.times, b.poses):
            rows.append((float(t), int(b.body_id), [float(v) for v in pose]))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", encoding="utf-8") as fh:
        for t, bid, pose in rows:
            fh.write(json.dumps({"t": t, "body_id": bid, "pose": pose}, separators=(",", ":")) + "\n")


def linear_path(t0, t1, p0, p1, steps, q=(1.0, 0.0, 0.0, 0.0)):
    """Keyframes for a straight-line move at constant orientation."""
    times = np.linspace(t0, t1, steps + 1)
    s = (times - t0) / (t1 - t0)
    pos = (1 - s)[:, None] * np.asarray(p0, dtype=float) + s[:, None] * np.asarray(p1, dtype=float)
    poses = np.concatenate([np.tile(np.asarray(q, dtype=float), (len(times), 1)), pos], axis=1)
    return times, poses
