"""Point-triangle contact between the deformable target and scripted bodies.

The unknown vector stacks target vertices first, then every scripted body's
vertices. Pairs inside one target piece and pairs between two scripted
bodies are skipped; the two faces of a crack are ordinary contact surfaces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix

from .. import _kernels
from .energy import InvariantViolation, barrier, barrier_d1, barrier_d2
from .tetmesh import TetMesh


@dataclass(frozen=True)
class ContactPairs:
    point: np.ndarray     # row into the stacked position array
    tri: np.ndarray       # (k, 3) rows into the stacked position array
    tri_id: np.ndarray    # index into ContactScene.tris
    point_local: np.ndarray
    d: np.ndarray
    normal: np.ndarray    # unit vector from closest point to the point
    bary: np.ndarray

    def __len__(self):
        return len(self.d)


class ContactScene:
    def __init__(self, mesh: TetMesh, bodies, labels=None):
        n = mesh.n_vertices
        labels = mesh.vertex_labels() if labels is None else labels
        surf_v = mesh.surface_vertices
        pts = [surf_v]
        pgroup = [labels[surf_v]]
        tris = [mesh.surface]
        tgroup = [labels[mesh.surface[:, 0]]]
        tool_pt = [np.zeros(len(surf_v), dtype=bool)]
        tool_tri = [np.zeros(len(mesh.surface), dtype=bool)]
        offset = n
        for k, body in enumerate(bodies):
            nv = len(body.vertices)
            idx = np.arange(offset, offset + nv)
            pts.append(idx)
            pgroup.append(np.full(nv, -(k + 1)))
            tris.append(body.triangles + offset)
            tgroup.append(np.full(len(body.triangles), -(k + 1)))
            tool_pt.append(np.full(nv, body.role == "tool"))
            tool_tri.append(np.full(len(body.triangles), body.role == "tool"))
            offset += nv
        self.n_target = n
        self.n_total = offset
        self.points = np.concatenate(pts).astype(np.int64)
        self.point_group = np.concatenate(pgroup).astype(np.int64)
        self.tris = np.concatenate(tris).astype(np.int64)
        self.tri_group = np.concatenate(tgroup).astype(np.int64)
        self.tool_point = np.concatenate(tool_pt)
        self.tool_tri = np.concatenate(tool_tri)
        self.target_surface = mesh.surface
        # target surface triangles touching each target vertex
        inc = [[] for _ in range(n)]
        for j, tri in enumerate(mesh.surface):
            for v in tri:
                inc[v].append(j)
        self.incident = inc

    def pairs(self, X, radius) -> ContactPairs:
        P = np.ascontiguousarray(X[self.points])
        T = np.ascontiguousarray(X[self.tris])
        pi, ti, sq, bary = _kernels.pairs_within(P, self.point_group, T, self.tri_group, float(radius))
        d = np.sqrt(sq)
        q = np.einsum("kj,kjd->kd", bary, T[ti]) if len(pi) else np.zeros((0, 3))
        diff = P[pi] - q
        with np.errstate(invalid="ignore", divide="ignore"):
            normal = np.where(d[:, None] > 0, diff / d[:, None], 0.0)
        return ContactPairs(self.points[pi], self.tris[ti], ti, pi, d, normal, bary)

    def min_distance(self, X) -> float:
        """Exhaustive minimum over every valid surface pair."""
        span = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
        pr = self.pairs(X, 2.0 * span + 1.0)
        return float(pr.d.min()) if len(pr) else np.inf

    # barrier ---------------------------------------------------------------------------

    def barrier_energy(self, X, dhat, pr: ContactPairs | None = None) -> float:
        pr = self.pairs(X, dhat) if pr is None else pr
        if len(pr) and pr.d.min() <= 0:
            raise InvariantViolation("contact pair at nonpositive distance")
        return float(barrier(pr.d, dhat).sum()) if len(pr) else 0.0

    @staticmethod
    def _dofs(pr: ContactPairs):
        verts = np.concatenate([pr.point[:, None], pr.tri], axis=1)  # (k, 4)
        return (3 * verts[:, :, None] + np.arange(3)).reshape(-1, 12)

    @staticmethod
    def _dist_grad(pr: ContactPairs):
        w = np.concatenate([np.ones((len(pr), 1)), -pr.bary], axis=1)  # (k, 4)
        return (w[:, :, None] * pr.normal[:, None, :]).reshape(-1, 12)

    def barrier_gradient(self, X, dhat, pr: ContactPairs | None = None):
        pr = self.pairs(X, dhat) if pr is None else pr
        g = np.zeros(X.size)
        if len(pr):
            local = barrier_d1(pr.d, dhat)[:, None] * self._dist_grad(pr)
            np.add.at(g, self._dofs(pr).reshape(-1), local.reshape(-1))
        return g.reshape(X.shape)

    def barrier_hessian(self, X, dhat, pr: ContactPairs | None = None):
        """Gauss-Newton Hessian b''(d) grad d grad d^T (PSD on the barrier support)."""
        pr = self.pairs(X, dhat) if pr is None else pr
        n3 = X.size
        if not len(pr):
            return coo_matrix((n3, n3)).tocsr()
        gd = self._dist_grad(pr)
        H = barrier_d2(pr.d, dhat)[:, None, None] * gd[:, :, None] * gd[:, None, :]
        dof = self._dofs(pr)
        rows = np.repeat(dof, 12, axis=1).reshape(-1)
        cols = np.tile(dof, (1, 12)).reshape(-1)
        return coo_matrix((H.reshape(-1), (rows, cols)), shape=(n3, n3)).tocsr()

    # step filter -----------------------------------------------------------------------

    def max_step(self, X, P, safety=0.9) -> float:
        """Largest alpha <= 1 keeping every pair distance positive along X + alpha P.

        For any point q of the triangle, p - q changes by a convex combination
        of dp - dv_i, so the distance drops by at most max_i |dp - dv_i| per
        unit alpha; alpha <= safety * d / max_i |dp - dv_i| per pair suffices.
        """
        mag = np.linalg.norm(P, axis=1)
        reach = float(mag[self.points].max(initial=0.0) + mag[self.tris].max(initial=0.0))
        if reach == 0.0:
            return 1.0
        pr = self.pairs(X, reach / safety)
        if not len(pr):
            return 1.0
        rel = P[pr.point][:, None, :] - P[pr.tri]
        bound = np.linalg.norm(rel, axis=2).max(axis=1)
        with np.errstate(divide="ignore"):
            alpha = np.where(bound > 0, safety * pr.d / bound, np.inf)
        return float(min(1.0, alpha.min()))

    # metrics ---------------------------------------------------------------------------

    def tool_pressure(self, X, dhat, kappa):
        """(total barrier force on tool pairs, contact area, pressure)."""
        pr = self.pairs(X, dhat)
        if not len(pr):
            return 0.0, 0.0, 0.0
        point_is_tool = self.tool_point[pr.point_local]
        tri_is_tool = self.tool_tri[pr.tri_id]
        sel = point_is_tool | tri_is_tool
        if not np.any(sel):
            return 0.0, 0.0, 0.0
        force = float((kappa * np.abs(barrier_d1(pr.d[sel], dhat))).sum())
        touched = set()
        nt = len(self.target_surface)
        for pl, tid, is_pt_tool in zip(pr.point_local[sel], pr.tri_id[sel], point_is_tool[sel]):
            if is_pt_tool:
                if tid < nt:
                    touched.add(int(tid))
            else:
                touched.update(self.incident[int(self.points[pl])])
        if not touched:
            return force, 0.0, 0.0
        tri = self.target_surface[sorted(touched)]
        area = float(0.5 * np.linalg.norm(np.cross(X[tri[:, 1]] - X[tri[:, 0]], X[tri[:, 2]] - X[tri[:, 0]]),
                                          axis=1).sum())
        return force, area, force / area
