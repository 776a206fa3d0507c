"""Closed triangle meshes: validation, OBJ I/O, generators and inside/distance queries."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..quat import Pose


class MeshError(ValueError):
    pass


# skew, mutually non-parallel ray directions for the parity vote
_RAY_DIRS = np.array([
    [0.5773502691896258, 0.5656854249492380, 0.5888543819998317],
    [-0.6123724356957945, 0.3535533905932738, 0.7071067811865476],
    [0.2672612419124244, -0.8017837257372732, 0.5345224838248488],
])


@dataclass
class ObjectMesh:
    """Triangle surface in its local frame plus a world pose."""

    vertices: np.ndarray
    triangles: np.ndarray
    pose: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError("vertices must be (n, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must be (m, 3)")
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise MeshError("triangle index out of range")

    @property
    def watertight(self) -> bool:
        return is_watertight(self.triangles)

    def world_vertices(self):
        return self.pose.apply(self.vertices)

    def world_triangles(self):
        return self.world_vertices()[self.triangles]

    def with_pose(self, pose: Pose) -> "ObjectMesh":
        return ObjectMesh(self.vertices, self.triangles, pose)

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    def signed_volume(self) -> float:
        v = self.vertices[self.triangles]
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


def is_watertight(triangles) -> bool:
    """Every directed edge appears once and its reverse once (closed, consistently oriented)."""
    tris = np.asarray(triangles)
    if tris.size == 0:
        return False
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    keys = {(int(a), int(b)) for a, b in directed}
    if len(keys) != len(directed):
        return False
    return all((b, a) in keys for a, b in keys)


def require_watertight(mesh: ObjectMesh) -> None:
    if not mesh.watertight:
        raise MeshError("mesh is not watertight (every edge must be shared by exactly two triangles)")
    if mesh.signed_volume() <= 0:
        raise MeshError("mesh normals must point outward")


def check_nondegenerate(tris_xyz, tol=0.0) -> None:
    e1 = tris_xyz[:, 1] - tris_xyz[:, 0]
    e2 = tris_xyz[:, 2] - tris_xyz[:, 0]
    area2 = np.linalg.norm(np.cross(e1, e2), axis=1)
    scale = max(float(np.ptp(tris_xyz.reshape(-1, 3), axis=0).max()), 1e-300)
    if np.any(area2 <= tol * scale * scale):
        raise MeshError("mesh has degenerate (zero-area) triangles")


def boundary_tolerance(tris_xyz) -> float:
    span = np.ptp(tris_xyz.reshape(-1, 3), axis=0)
    return 1e-9 * float(np.linalg.norm(span))


def points_in_mesh(points, tris_xyz, boundary_tol=None):
    """Inside test by ray-crossing parity, majority of three skew rays.

    Points within ``boundary_tol`` of the surface count as inside.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tris_xyz = np.ascontiguousarray(tris_xyz, dtype=float)
    check_nondegenerate(tris_xyz)
    if boundary_tol is None:
        boundary_tol = boundary_tolerance(tris_xyz)
    sq, _, _ = _kernels.nearest_triangle(pts, tris_xyz)
    on_surface = sq <= boundary_tol * boundary_tol
    votes = np.zeros(len(pts), dtype=np.int64)
    for d in _RAY_DIRS:
        votes += _kernels.ray_crossings(pts, d, tris_xyz) % 2
    return on_surface | (votes >= 2)


def point_in_mesh(p, mesh: ObjectMesh) -> bool:
    return bool(points_in_mesh(np.asarray(p, dtype=float)[None], mesh.world_triangles())[0])


def signed_distance(points, tris_xyz):
    """Distance to the surface, negative inside. Also returns the closest surface points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    sq, ti, bary = _kernels.nearest_triangle(pts, tris_xyz)
    closest = np.einsum("ij,ijk->ik", bary, tris_xyz[ti])
    inside = points_in_mesh(pts, tris_xyz, boundary_tol=0.0)
    d = np.sqrt(sq)
    return np.where(inside, -d, d), closest


# generators -------------------------------------------------------------------------------

def box_mesh(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0), divisions=1) -> ObjectMesh:
    """Axis-aligned box, each face split into ``divisions**2`` quads."""
    ext = np.asarray(extents, dtype=float) / 2
    n = int(divisions)
    verts = []
    index = {}

    def vid(p):
        key = tuple(np.round(p, 12))
        if key not in index:
            index[key] = len(verts)
            verts.append(p)
        return index[key]

    tris = []
    g = np.linspace(-1.0, 1.0, n + 1)
    for axis in range(3):
        for sign in (-1.0, 1.0):
            u_ax, v_ax = (axis + 1) % 3, (axis + 2) % 3
            # (u, v, axis) is cyclic so u x v = +axis; swap for the negative face
            if sign < 0:
                u_ax, v_ax = v_ax, u_ax
            for i in range(n):
                for j in range(n):
                    quad = []
                    for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = np.zeros(3)
                        p[axis] = sign
                        p[u_ax] = g[i + du]
                        p[v_ax] = g[j + dv]
                        quad.append(vid(p * ext))
                    tris.append((quad[0], quad[1], quad[2]))
                    tris.append((quad[0], quad[2], quad[3]))
    mesh = ObjectMesh(np.asarray(verts) + np.asarray(center, dtype=float), np.asarray(tris))
    return _orient_outward(mesh)


def _orient_outward(mesh: ObjectMesh) -> ObjectMesh:
    if mesh.signed_volume() < 0:
        mesh.triangles = np.ascontiguousarray(mesh.triangles[:, ::-1])
    return mesh


def icosphere(radius=1.0, subdivisions=2, center=(0.0, 0.0, 0.0)) -> ObjectMesh:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(int(subdivisions)):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    mesh = ObjectMesh(np.asarray(verts) * radius + np.asarray(center, dtype=float), np.asarray(faces))
    return _orient_outward(mesh)


def revolve(profile, segments=24, center=(0.0, 0.0, 0.0)) -> ObjectMesh:
    """Surface of revolution about z of a closed (r, z) polygon with r > 0 everywhere."""
    prof = np.asarray(profile, dtype=float)
    k = len(prof)
    ang = np.linspace(0.0, 2 * math.pi, segments, endpoint=False)
    verts = np.array([[r * math.cos(a), r * math.sin(a), z] for a in ang for r, z in prof])
    tris = []
    for s in range(segments):
        s2 = (s + 1) % segments
        for i in range(k):
            i2 = (i + 1) % k
            a, b = s * k + i, s * k + i2
            c, d = s2 * k + i2, s2 * k + i
            tris.append((a, b, c))
            tris.append((a, c, d))
    mesh = ObjectMesh(verts + np.asarray(center, dtype=float), np.asarray(tris))
    return _orient_outward(mesh)


def mug_like(outer_radius=0.04, wall=0.008, height=0.09, segments=24) -> ObjectMesh:
    """Open-ended thick-walled cylinder: non-convex with an empty bore."""
    ri, ro = outer_radius - wall, outer_radius
    return revolve([(ri, 0.0), (ro, 0.0), (ro, height), (ri, height)], segments)


def bar(length=0.2, width=0.03, height=0.03, divisions=4) -> ObjectMesh:
    return box_mesh((length, width, height), divisions=divisions)


# OBJ ---------------------------------------------------------------------------------------

def read_obj(path) -> ObjectMesh:
    """ASCII OBJ, ``v`` and ``f`` records only; polygons are fan-triangulated."""
    verts, tris = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                    for j in range(1, len(idx) - 1):
                        tris.append((idx[0], idx[j], idx[j + 1]))
            except (ValueError, IndexError) as exc:
                raise MeshError(f"{path}:{lineno}: bad OBJ record ({exc})") from exc
    return ObjectMesh(np.asarray(verts, dtype=float).reshape(-1, 3), np.asarray(tris, dtype=np.int64).reshape(-1, 3))


def write_obj(mesh_or_vertices, path, triangles=None) -> None:
    if triangles is None:
        verts, tris = mesh_or_vertices.vertices, mesh_or_vertices.triangles
    else:
        verts, tris = mesh_or_vertices, triangles
    with open(path, "w", encoding="utf-8") as fh:
        for v in verts:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in tris:
            fh.write(f"f {int(t[0]) + 1} {int(t[1]) + 1} {int(t[2]) + 1}\n")
