"""Strain-threshold fracture and graph-based topology rebuild."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .tetmesh import MeshValidityError, TetMesh, tet_volumes


class RebuildError(RuntimeError):
    pass


_FACE_PAIRS = ((0, 1), (1, 2), (0, 2))


def face_keys(mesh: TetMesh, faces) -> list:
    """Faces identified by their origin vertex ids (stable across duplication)."""
    return [tuple(sorted(int(v) for v in mesh.origin[f])) for f in faces]


def stretch_ratios(x, mesh: TetMesh):
    """(f, 3) current/rest length of every vertex pair of every interior face."""
    f = mesh.interior_faces
    out = np.empty((len(f), 3))
    for k, (i, j) in enumerate(_FACE_PAIRS):
        rest = np.linalg.norm(mesh.rest[f[:, i]] - mesh.rest[f[:, j]], axis=1)
        if np.any(rest <= 0):
            raise MeshValidityError("interior face with a zero-length rest edge")
        out[:, k] = np.linalg.norm(x[f[:, i]] - x[f[:, j]], axis=1) / rest
    return out


def fracture_update(state, mesh: TetMesh, threshold: float = 1.1) -> frozenset:
    """Interior faces newly marked separated (any vertex pair stretched past ``threshold``)."""
    if len(mesh.interior_faces) == 0:
        return frozenset()
    over = np.any(stretch_ratios(state.x, mesh) > threshold, axis=1)
    keys = face_keys(mesh, mesh.interior_faces[over])
    return frozenset(k for k in keys if k not in state.separated)


def separated_mask(mesh: TetMesh, separated) -> np.ndarray:
    if not separated or len(mesh.interior_faces) == 0:
        return np.zeros(len(mesh.interior_faces), dtype=bool)
    keys = face_keys(mesh, mesh.interior_faces)
    return np.array([k in separated for k in keys], dtype=bool)


def rebuild_topology(mesh: TetMesh, separated, state, eps: float):
    """Split the mesh into connected pieces across separated faces.

    Returns ``(new_mesh, new_state, pieces)``. Vertices shared by several
    pieces are duplicated; each copy moves by ``eps`` along the crack normal
    into its own piece, so the two sides of a planar crack open by ``2 * eps``.
    The move must leave the copies distinct and flip no tet, otherwise it is
    retried once with ``2 * eps``.
    """
    mask = separated_mask(mesh, separated)
    n_comp, tet_lab = mesh.components(mask)
    if n_comp == 1:
        return mesh, replace(state, separated=frozenset(separated) | state.separated, pieces=1), 1

    # per vertex, the components touching it
    owners: dict[int, set] = {}
    for t, tet in enumerate(mesh.tets):
        for v in tet:
            owners.setdefault(int(v), set()).add(int(tet_lab[t]))
    merged = frozenset(separated) | state.separated
    if all(len(c) == 1 for c in owners.values()):
        return mesh, replace(state, separated=merged, pieces=int(n_comp)), int(n_comp)
    n = mesh.n_vertices
    new_index = {}
    extra_src = []
    for v in range(n):
        comps = sorted(owners.get(v, ()))
        for k, c in enumerate(comps):
            if k == 0:
                new_index[(v, c)] = v
            else:
                new_index[(v, c)] = n + len(extra_src)
                extra_src.append(v)
    extra_src = np.asarray(extra_src, dtype=np.int64)
    tets = np.array([[new_index[(int(v), int(tet_lab[t]))] for v in tet] for t, tet in enumerate(mesh.tets)],
                    dtype=np.int64)
    rest = np.concatenate([mesh.rest, mesh.rest[extra_src]]) if len(extra_src) else mesh.rest.copy()
    origin = np.concatenate([mesh.origin, mesh.origin[extra_src]])
    x0 = np.concatenate([state.x, state.x[extra_src]])
    v0 = np.concatenate([state.v, state.v[extra_src]])
    new_mesh = TetMesh(rest, tets, origin)

    # each copy moves along the mean unit normal of the crack faces at it, pointing into its own piece
    split = [v for v in range(n) if len(owners.get(v, ())) > 1]
    copies = [[new_index[(v, c)] for c in sorted(owners[v])] for v in split]
    moving = np.array([i for c in copies for i in c], dtype=np.int64)
    inward = np.zeros_like(x0)
    cx = state.x
    for f, (ta, tb) in zip(mesh.interior_faces[mask], mesh.interior_tets[mask]):
        ca, cb = int(tet_lab[ta]), int(tet_lab[tb])
        if ca == cb:
            continue
        nrm = np.cross(cx[f[1]] - cx[f[0]], cx[f[2]] - cx[f[0]])
        nrm /= np.linalg.norm(nrm)
        if (cx[mesh.tets[ta]].mean(axis=0) - cx[f].mean(axis=0)) @ nrm < 0:
            nrm = -nrm
        for v in f:
            inward[new_index[(int(v), ca)]] += nrm
            inward[new_index[(int(v), cb)]] -= nrm
    # fallback where the normals cancel: toward the centroid of the copy's own tets
    tet_centroid = x0[tets].mean(axis=1)
    toward = np.zeros_like(x0)
    for t, tet in enumerate(tets):
        toward[tet] += tet_centroid[t] - x0[tet]
    scale = np.linalg.norm(x0.max(axis=0) - x0.min(axis=0))
    weak = np.linalg.norm(inward[moving], axis=1) < 1e-9
    inward[moving[weak]] = toward[moving[weak]]
    norm = np.linalg.norm(inward[moving], axis=1, keepdims=True)
    if np.any(norm <= 1e-12 * scale):
        raise RebuildError("degenerate piece at a split vertex")
    direction = inward[moving] / norm

    before = np.sign(tet_volumes(x0, tets))
    for scale in (1.0, 2.0):
        x = x0.copy()
        x[moving] += eps * scale * direction
        distinct = all(np.linalg.norm(x[a] - x[b]) > 0 for c in copies for i, a in enumerate(c) for b in c[i + 1:])
        if distinct and np.all(np.sign(tet_volumes(x, tets)) == before):
            new_state = replace(state, x=x, v=v0, separated=merged, pieces=int(n_comp))
            return new_mesh, new_state, int(n_comp)
    raise RebuildError(f"duplicate vertices could not be separated with eps={2 * eps!r}")
