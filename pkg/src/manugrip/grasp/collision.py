"""Capsule hand model and hand/object penetration queries."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..kinematics import HandGeometry, HandState, phalanx_segments
from ..quat import Pose, to_matrix
from .mesh import MeshError, ObjectMesh, points_in_mesh, require_watertight

PALM_ID = 0
DEFAULT_RADIUS = 0.008
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Capsule:
    phalanx: int
    a: np.ndarray
    b: np.ndarray
    radius: float


@dataclass(frozen=True)
class PalmBox:
    pose: Pose
    extents: np.ndarray  # full side lengths along palm x, y, z


@dataclass(frozen=True)
class CollisionPoint:
    position: np.ndarray
    phalanx: int
    depth: float

    def to_record(self) -> dict:
        return {"position": [float(x) for x in self.position], "phalanx": int(self.phalanx),
                "depth": float(self.depth)}

    @classmethod
    def from_record(cls, rec: dict) -> "CollisionPoint":
        return cls(np.asarray(rec["position"], dtype=float), int(rec["phalanx"]), float(rec["depth"]))


@dataclass(frozen=True)
class HandCollisionModel:
    capsules: tuple
    palm: PalmBox | None

    def __post_init__(self):
        for c in self.capsules:
            if not c.radius > 0:
                raise ValueError(f"capsule radius must be positive, got {c.radius}")

    @classmethod
    def from_state(cls, geometry: HandGeometry, state: HandState, radius=DEFAULT_RADIUS,
                   include_palm=True) -> "HandCollisionModel":
        caps = tuple(Capsule(pid, a, b, float(radius)) for pid, a, b in phalanx_segments(geometry, state))
        palm = None
        if include_palm:
            ext = np.array([geometry.palm_length, geometry.palm_width, geometry.palm_thickness])
            palm = PalmBox(state.wrist, ext)
        return cls(caps, palm)

    def transformed(self, T: Pose) -> "HandCollisionModel":
        caps = tuple(Capsule(c.phalanx, T.apply(c.a), T.apply(c.b), c.radius) for c in self.capsules)
        palm = None if self.palm is None else PalmBox(T @ self.palm.pose, self.palm.extents)
        return HandCollisionModel(caps, palm)


class _SurfaceQuery:
    """Signed distance to one posed mesh, cached triangle soup."""

    def __init__(self, tris_xyz):
        self.tris = np.ascontiguousarray(tris_xyz, dtype=float)

    def unsigned(self, pts):
        sq, ti, bary = _kernels.nearest_triangle(np.ascontiguousarray(pts, dtype=float), self.tris)
        return np.sqrt(sq), ti, bary

    def signed(self, pts):
        d, ti, bary = self.unsigned(pts)
        inside = points_in_mesh(pts, self.tris)
        closest = np.einsum("ij,ijk->ik", bary, self.tris[ti])
        return np.where(inside, -d, d), closest


_TIE = 1e-12


def _first_max(values):
    """Lowest index whose value ties the maximum, so witnesses do not depend on rounding."""
    values = np.asarray(values)
    tol = _TIE * max(1.0, float(np.abs(values).max()))
    return int(np.nonzero(values >= values.max() - tol)[0][0])


def capsule_penetration(cap: Capsule, query: _SurfaceQuery, samples=17, tol=1e-7):
    """Deepest penetration of a capsule into the mesh, or None.

    Depth is ``radius - min signed distance`` along the axis; the minimum is
    found by sampling the axis and refining the best bracket by golden-section
    search.
    """
    t = np.linspace(0.0, 1.0, samples)
    axis = cap.b - cap.a
    length = float(np.linalg.norm(axis))
    pts = cap.a + t[:, None] * axis
    d_u, _, _ = query.unsigned(pts)
    # distance is 1-Lipschitz along the axis
    if d_u.min() - 0.5 * length / (samples - 1) > cap.radius:
        return None
    sd, _ = query.signed(pts)
    k = int(np.argmin(sd))
    lo, hi = t[max(k - 1, 0)], t[min(k + 1, samples - 1)]

    def f(s):
        return float(query.signed((cap.a + s * axis)[None])[0][0])

    if length > 0:
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = f(x1), f(x2)
        while (hi - lo) * length > tol:
            if f1 < f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = f(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = f(x2)
    cand = np.array([t[k], lo, hi, 0.5 * (lo + hi)])
    sd_c, _ = query.signed(cap.a + cand[:, None] * axis)
    best = float(sd_c.min())
    if cap.radius - best <= 0.0:
        return None
    # the deepest point need not be unique (an axis parallel to an edge); take the proximal-most one
    cut = best + _TIE * max(length, cap.radius)
    t_best = float(cand[int(np.argmin(sd_c))])
    first = int(np.argmax(sd <= cut)) if np.any(sd <= cut) else samples
    if first < samples and t[first] <= t_best:
        t_best = float(t[first])
    if t_best > 0.0:
        left = float(t[np.searchsorted(t, t_best) - 1]) if t_best > t[0] else 0.0
        if f(left) <= cut:
            t_best = left
        else:
            for _ in range(60):
                mid = 0.5 * (left + t_best)
                if mid in (left, t_best):
                    break
                if f(mid) <= cut:
                    t_best = mid
                else:
                    left = mid
    sd_b, closest_b = query.signed((cap.a + t_best * axis)[None])
    depth = cap.radius - float(sd_b[0])
    if depth <= 0.0:
        return None
    return CollisionPoint(closest_b[0], cap.phalanx, depth)


def _box_samples(box: PalmBox, n=5):
    g = np.linspace(-0.5, 0.5, n)
    pts = []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        for s in (-0.5, 0.5):
            for x in g:
                for y in g:
                    p = np.zeros(3)
                    p[axis], p[u], p[v] = s, x, y
                    pts.append(p)
    pts = np.unique(np.asarray(pts), axis=0) * box.extents
    return box.pose.apply(pts)


def box_penetration(box: PalmBox, query: _SurfaceQuery, world_vertices, samples=5):
    """Approximate deepest penetration between the palm box and the mesh.

    Two witness families: box-surface samples inside the mesh (depth = their
    distance to the mesh surface) and mesh vertices inside the box (depth = their
    distance to the box surface).
    """
    best = None
    pts = _box_samples(box, samples)
    sd, closest = query.signed(pts)
    if np.any(sd < 0):
        k = _first_max(-sd)
        best = (-float(sd[k]), closest[k])
    R = to_matrix(box.pose.rotation)
    local = (world_vertices - box.pose.translation) @ R
    half = box.extents / 2
    slack = half - np.abs(local)
    inside = np.all(slack > 0, axis=1)
    if np.any(inside):
        depth = slack[inside].min(axis=1)
        k = _first_max(depth)
        if best is None or depth[k] > best[0] + _TIE * box.extents.max():
            best = (float(depth[k]), world_vertices[inside][k])
    if best is None or best[0] <= 0:
        return None
    return CollisionPoint(np.asarray(best[1], dtype=float), PALM_ID, best[0])


def detect_collisions(hand: HandCollisionModel, mesh: ObjectMesh) -> list[CollisionPoint]:
    """One collision point per penetrating primitive, ordered by phalanx id."""
    require_watertight(mesh)
    tris = mesh.world_triangles()
    query = _SurfaceQuery(tris)
    out = []
    if hand.palm is not None:
        hit = box_penetration(hand.palm, query, mesh.world_vertices())
        if hit is not None:
            out.append(hit)
    for cap in hand.capsules:
        hit = capsule_penetration(cap, query)
        if hit is not None:
            out.append(hit)
    return out


def collision_center(collisions) -> np.ndarray:
    if not collisions:
        raise ValueError("caging test needs at least one collision point")
    return np.mean([c.position for c in collisions], axis=0)


def caging_test(collisions, mesh: ObjectMesh) -> bool:
    """True iff the geometric center of the collision points lies inside the object."""
    center = collision_center(collisions)
    if not mesh.watertight:
        raise MeshError("caging is undefined for a non-watertight mesh")
    return bool(points_in_mesh(center[None], mesh.world_triangles())[0])
