"""Built-in desk-scale scenarios."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grasp.mesh import box_mesh
from .energy import MaterialParams
from .scripted import ScriptedBody, linear_path
from .tetmesh import TetMesh, ball_tets, box_tets

SCENARIOS = ("plate-press", "hammer-fast", "hammer-slow", "knife", "stationary")


@dataclass(frozen=True)
class Scenario:
    mesh: TetMesh
    material: MaterialParams
    bodies: list
    steps: int
    pinned: frozenset = frozenset()


def wedge_surface(length=0.05, height=0.02, half_width=0.004, segments=24):
    """Closed triangular prism with its sharp edge along y at z = 0."""
    ys = np.linspace(-length / 2, length / 2, segments + 1)
    verts = []
    for y in ys:
        verts += [(0.0, y, 0.0), (-half_width, y, height), (half_width, y, height)]
    verts = np.asarray(verts)
    tris = []
    for i in range(segments):
        e0, l0, r0 = 3 * i, 3 * i + 1, 3 * i + 2
        e1, l1, r1 = e0 + 3, l0 + 3, r0 + 3
        tris += [(e0, l1, l0), (e0, e1, l1), (e0, r0, r1), (e0, r1, e1), (l0, l1, r1), (l0, r1, r0)]
    last = 3 * segments
    tris += [(0, 1, 2), (last, last + 2, last + 1)]
    return verts, np.asarray(tris, dtype=np.int64)


def _table(top_z, size=0.12, thickness=0.01, body_id=0):
    m = box_mesh((size, size, thickness), center=(0.0, 0.0, top_z - thickness / 2))
    return ScriptedBody.static(body_id, m.vertices, m.triangles, role="support")


def plate_press(steps=100, dt=0.05, press_depth=0.002, press_steps=60):
    """Soft block on a table squeezed by a descending plate, then held."""
    mesh = box_tets((0.04, 0.04, 0.02), (4, 4, 2))
    dhat = 1e-3 * mesh.diagonal()
    table = _table(-0.01 - 0.5 * dhat)
    plate = box_mesh((0.06, 0.06, 0.005), divisions=4)
    start = 0.01 + 0.001 + 0.0025
    t_press = press_steps * dt
    times = [0.0, t_press, steps * dt]
    z = [start, start - 0.001 - press_depth, start - 0.001 - press_depth]
    poses = [[1, 0, 0, 0, 0, 0, zz] for zz in z]
    tool = ScriptedBody(1, plate.vertices, plate.triangles, np.array(times), np.array(poses, dtype=float))
    return Scenario(mesh, MaterialParams.carrot(), [table, tool], steps)


def walnut(divisions=4, radius=0.015) -> TetMesh:
    return ball_tets(radius, divisions)


def strike(tool="hammer", speed="fast", dt=0.05, radius=0.015, press_steps=10, hold_steps=10,
           knife_offset=0.0015):
    """Walnut-like ball held on an anvil (see ``anvil_pins``) struck from above.

    The tool presses, then holds. Both strikes cover the same press window; the fast one travels further in
    it and so indents deeper. A knife run with the same ``speed`` moves exactly
    like the hammer (same speed and nominal mass, hence the same imposed
    energy); its edge sits ``knife_offset`` off the ball's axis.
    """
    mesh = walnut(radius=radius)
    top = float(mesh.rest[:, 2].max())
    gap = 0.002
    depth = {"fast": 0.35, "slow": 0.08}[speed] * 2 * radius
    if tool == "hammer":
        m = box_mesh((0.04, 0.04, 0.01), center=(0.0, 0.0, 0.005), divisions=6)
        verts, tris = m.vertices, m.triangles
    elif tool == "knife":
        verts, tris = wedge_surface()
        verts = verts + np.array([knife_offset, 0.0, 0.0])
    else:
        raise ValueError(f"unknown tool {tool!r}")
    z0 = top + gap
    z1 = z0 - gap - depth
    t1 = press_steps * dt
    t2 = t1 + hold_steps * dt
    times = np.array([0.0, t1, t2])
    poses = np.array([[1, 0, 0, 0, 0, 0, z] for z in (z0, z1, z1)], dtype=float)
    body = ScriptedBody(1, verts, tris, times, poses)
    steps = press_steps + hold_steps
    return Scenario(mesh, MaterialParams.walnut(), [body], steps, anvil_pins(mesh))


def anvil_pins(mesh: TetMesh, cap=0.25) -> frozenset:
    """Vertices in the bottom cap of the ball, held fixed like a seat in an anvil."""
    z = mesh.rest[:, 2]
    lo, hi = z.min(), z.max()
    return frozenset(int(v) for v in np.nonzero(z <= lo + cap * (hi - lo) / 2)[0])


def stationary(steps=10, dt=0.05):
    """Walnut on the anvil with a tool that never moves."""
    mesh = walnut()
    m = box_mesh((0.04, 0.04, 0.01), center=(0.0, 0.0, 0.05))
    times, poses = linear_path(0.0, steps * dt, (0, 0, 0), (0, 0, 0), 1)
    body = ScriptedBody(1, m.vertices, m.triangles, times, poses)
    return Scenario(mesh, MaterialParams.walnut(), [body], steps, anvil_pins(mesh))


def build(name: str, dt=0.05) -> Scenario:
    if name == "plate-press":
        return plate_press(dt=dt)
    if name == "hammer-fast":
        return strike("hammer", "fast", dt=dt)
    if name == "hammer-slow":
        return strike("hammer", "slow", dt=dt)
    if name == "knife":
        return strike("knife", "slow", dt=dt)
    if name == "stationary":
        return stationary(dt=dt)
    raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
