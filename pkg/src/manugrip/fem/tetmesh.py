"""Tetrahedral volume meshes: topology, generators and node/element files."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class MeshValidityError(ValueError):
    pass


# outward faces of a positively oriented tet (a, b, c, d)
_TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])


def tet_volumes(x, tets):
    a, b, c, d = (x[tets[:, i]] for i in range(4))
    return np.einsum("ij,ij->i", b - a, np.cross(c - a, d - a)) / 6.0


@dataclass(frozen=True, eq=False)
class TetMesh:
    """Rest geometry and topology.

    ``origin`` maps each vertex to the vertex it was duplicated from (itself
    for unsplit meshes) so faces and pins keep their identity after fracture.
    """

    rest: np.ndarray
    tets: np.ndarray
    origin: np.ndarray | None = None

    def __post_init__(self):
        rest = np.ascontiguousarray(self.rest, dtype=float)
        tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        if rest.ndim != 2 or rest.shape[1] != 3:
            raise MeshValidityError("rest positions must be (n, 3)")
        if tets.ndim != 2 or tets.shape[1] != 4 or len(tets) == 0:
            raise MeshValidityError("tets must be a non-empty (m, 4) array")
        if tets.min() < 0 or tets.max() >= len(rest):
            raise MeshValidityError("tet index out of range")
        vol = tet_volumes(rest, tets)
        if np.any(vol <= 0):
            raise MeshValidityError(f"{int((vol <= 0).sum())} tets have nonpositive rest volume")
        origin = np.arange(len(rest)) if self.origin is None else np.asarray(self.origin, dtype=np.int64)
        object.__setattr__(self, "rest", rest)
        object.__setattr__(self, "tets", tets)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "volumes", vol)
        Dm = np.stack([rest[tets[:, i]] - rest[tets[:, 0]] for i in (1, 2, 3)], axis=2)
        object.__setattr__(self, "Dm_inv", np.linalg.inv(Dm))
        self._build_faces()

    def _build_faces(self):
        m = len(self.tets)
        faces = self.tets[:, _TET_FACES].reshape(-1, 3)
        owner = np.repeat(np.arange(m), 4)
        keys = np.sort(faces, axis=1)
        uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        inv = inv.reshape(-1)
        if np.any(counts > 2):
            raise MeshValidityError("a face is shared by more than two tets")
        boundary = counts[inv] == 1
        object.__setattr__(self, "surface", np.ascontiguousarray(faces[boundary]))
        object.__setattr__(self, "surface_owner", owner[boundary])
        order = np.argsort(inv, kind="stable")
        inner = order[counts[inv[order]] == 2].reshape(-1, 2)
        object.__setattr__(self, "interior_faces", np.ascontiguousarray(uniq[inv[inner[:, 0]]]))
        object.__setattr__(self, "interior_tets", np.ascontiguousarray(owner[inner]))

    @property
    def n_vertices(self) -> int:
        return len(self.rest)

    @property
    def surface_vertices(self):
        return np.unique(self.surface)

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.rest.max(axis=0) - self.rest.min(axis=0)))

    def components(self, separated_mask=None):
        """Tet labels of connected components over shared, non-separated faces."""
        keep = np.ones(len(self.interior_faces), dtype=bool) if separated_mask is None else ~separated_mask
        a, b = self.interior_tets[keep, 0], self.interior_tets[keep, 1]
        m = len(self.tets)
        graph = coo_matrix((np.ones(len(a)), (a, b)), shape=(m, m))
        return connected_components(graph, directed=False)

    def vertex_labels(self):
        """Component label per vertex (unsplit meshes must not share vertices across pieces)."""
        _, tet_lab = self.components()
        lab = np.full(self.n_vertices, -1, dtype=np.int64)
        lab[self.tets.reshape(-1)] = np.repeat(tet_lab, 4)
        return lab

    def lumped_mass(self, density: float):
        m = np.zeros(self.n_vertices)
        np.add.at(m, self.tets.reshape(-1), np.repeat(self.volumes * density / 4.0, 4))
        return m


# generators --------------------------------------------------------------------------------

# Kuhn subdivision of the unit cube into 6 tets sharing the 0-7 diagonal
_KUHN = [(0, 1, 3, 7), (0, 3, 2, 7), (0, 2, 6, 7), (0, 6, 4, 7), (0, 4, 5, 7), (0, 5, 1, 7)]


def _orient(x, tets):
    vol = tet_volumes(x, tets)
    tets = tets.copy()
    flip = vol < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3].copy(), tets[flip, 2].copy()
    return tets


def box_tets(extents=(1.0, 1.0, 1.0), divisions=(1, 1, 1), center=(0.0, 0.0, 0.0)) -> TetMesh:
    """Regular grid, every cell split into 6 tets (conforming across cells)."""
    nx, ny, nz = (int(d) for d in divisions)
    gx, gy, gz = (np.linspace(-0.5, 0.5, k + 1) * e for k, e in zip((nx, ny, nz), extents))
    X, Y, Z = np.meshgrid(gx, gy, gz, indexing="ij")
    x = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1) + np.asarray(center, dtype=float)

    def vid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    tets = []
    for i, j, k in itertools.product(range(nx), range(ny), range(nz)):
        corner = [vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) for c in range(8)]
        tets.extend([[corner[c] for c in t] for t in _KUHN])
    tets = np.asarray(tets, dtype=np.int64)
    return TetMesh(x, _orient(x, tets))


def ball_tets(radius=0.015, divisions=4, center=(0.0, 0.0, 0.0)) -> TetMesh:
    """Ball from a cube grid pushed through the cube-to-ball map."""
    cube = box_tets((2.0, 2.0, 2.0), (divisions,) * 3)
    p = cube.rest
    x2, y2, z2 = (p ** 2).T
    q = np.stack([
        p[:, 0] * np.sqrt(np.maximum(1 - y2 / 2 - z2 / 2 + y2 * z2 / 3, 0.0)),
        p[:, 1] * np.sqrt(np.maximum(1 - z2 / 2 - x2 / 2 + z2 * x2 / 3, 0.0)),
        p[:, 2] * np.sqrt(np.maximum(1 - x2 / 2 - y2 / 2 + x2 * y2 / 3, 0.0)),
    ], axis=1)
    x = q * radius + np.asarray(center, dtype=float)
    return TetMesh(x, _orient(x, cube.tets))


def two_tets(edge=0.01) -> TetMesh:
    """Two tets sharing the face (0, 1, 2)."""
    h = edge * np.sqrt(2.0 / 3.0)
    c = np.array([edge / 2, edge / (2 * np.sqrt(3.0)), 0.0])
    x = np.array([[0.0, 0.0, 0.0], [edge, 0.0, 0.0], [edge / 2, edge * np.sqrt(3.0) / 2, 0.0],
                  c + [0, 0, h], c - [0, 0, h]])
    tets = np.array([[0, 1, 2, 3], [0, 2, 1, 4]])
    return TetMesh(x, _orient(x, tets))


def single_tet(edge=0.01) -> TetMesh:
    x = np.array([[0.0, 0.0, 0.0], [edge, 0.0, 0.0], [0.0, edge, 0.0], [0.0, 0.0, edge]])
    return TetMesh(x, np.array([[0, 1, 2, 3]]))


# files -------------------------------------------------------------------------------------

def _read_table(path, width):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise MeshValidityError(f"{path}: empty file")
    try:
        count = int(lines[0][0])
    except ValueError as exc:
        raise MeshValidityError(f"{path}: first line must be the record count") from exc
    rows = lines[1:]
    if len(rows) != count:
        raise MeshValidityError(f"{path}: header says {count} records, found {len(rows)}")
    out = {}
    for k, row in enumerate(rows, start=2):
        if len(row) != width + 1:
            raise MeshValidityError(f"{path}:{k}: expected {width + 1} columns, got {len(row)}")
        out[int(row[0])] = row[1:]
    if sorted(out) != list(range(count)):
        raise MeshValidityError(f"{path}: ids must be 0..{count - 1}")
    return [out[i] for i in range(count)]


def read_tet_mesh(nodes_path, elements_path) -> TetMesh:
    x = np.asarray(_read_table(nodes_path, 3), dtype=float)
    tets = np.asarray(_read_table(elements_path, 4), dtype=np.int64)
    return TetMesh(x, tets)


def write_tet_mesh(mesh: TetMesh, nodes_path, elements_path, positions=None) -> None:
    x = mesh.rest if positions is None else positions
    with open(nodes_path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(x)}\n")
        for i, p in enumerate(x):
            fh.write(f"{i} {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
    with open(elements_path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(mesh.tets)}\n")
        for i, t in enumerate(mesh.tets):
            fh.write(f"{i} {t[0]} {t[1]} {t[2]} {t[3]}\n")
