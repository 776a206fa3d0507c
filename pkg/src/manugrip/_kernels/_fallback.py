"""Pure-numpy implementations of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_core`` extension. Arrays are float64 / int64 and C-contiguous on input.
"""
import numpy as np

NEAR_TIE = 1e-10


def closest_point_triangle(p, a, b, c):
    """Closest point on triangles ``abc`` to points ``p`` (row-wise).

    Returns squared distances ``(n,)`` and barycentric weights ``(n, 3)`` of the
    closest point. Region classification follows Ericson's Voronoi-region walk.
    """
    p = np.asarray(p, dtype=float)
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    n = p.shape[0]
    bary = np.empty((n, 3))
    done = np.zeros(n, dtype=bool)

    def assign(mask, l0, l1, l2):
        m = mask & ~done
        bary[m, 0] = l0[m] if np.ndim(l0) else l0
        bary[m, 1] = l1[m] if np.ndim(l1) else l1
        bary[m, 2] = l2[m] if np.ndim(l2) else l2
        done[m] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        assign((d1 <= 0) & (d2 <= 0), 1.0, 0.0, 0.0)
        assign((d3 >= 0) & (d4 <= d3), 0.0, 1.0, 0.0)
        v = d1 / (d1 - d3)
        assign((vc <= 0) & (d1 >= 0) & (d3 <= 0), 1.0 - v, v, 0.0)
        assign((d6 >= 0) & (d5 <= d6), 0.0, 0.0, 1.0)
        w = d2 / (d2 - d6)
        assign((vb <= 0) & (d2 >= 0) & (d6 <= 0), 1.0 - w, 0.0, w)
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        assign((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), 0.0, 1.0 - w, w)
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        assign(np.ones(n, dtype=bool), 1.0 - v - w, v, w)

    q = bary[:, 0:1] * a + bary[:, 1:2] * b + bary[:, 2:3] * c
    diff = p - q
    return np.einsum("ij,ij->i", diff, diff), bary


def _valid(pg, tg):
    return (pg[:, None] != tg[None, :]) & ~((pg[:, None] < 0) & (tg[None, :] < 0))


def _tri_spheres(tris):
    centers = tris.mean(axis=1)
    radii = np.sqrt(((tris - centers[:, None, :]) ** 2).sum(axis=2).max(axis=1))
    return centers, radii


def pairs_within(points, point_group, tris, tri_group, radius):
    """All valid point/triangle pairs closer than ``radius``.

    A pair is valid when the groups differ and not both are negative (negative
    groups mark kinematic bodies that never contact each other).
    Returns ``(point_idx, tri_idx, sqdist, bary)`` sorted by (point, tri).
    """
    points = np.ascontiguousarray(points, dtype=float)
    tris = np.ascontiguousarray(tris, dtype=float)
    point_group = np.asarray(point_group, dtype=np.int64)
    tri_group = np.asarray(tri_group, dtype=np.int64)
    centers, radii = _tri_spheres(tris)
    out_p, out_t, out_d, out_b = [], [], [], []
    r2 = radius * radius
    step = max(1, 65536 // max(1, tris.shape[0]))
    for start in range(0, points.shape[0], step):
        stop = min(points.shape[0], start + step)
        pts = points[start:stop]
        dc = np.sqrt(((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2))
        cand = (dc - radii[None, :] < radius) & _valid(point_group[start:stop], tri_group)
        pi, ti = np.nonzero(cand)
        if pi.size == 0:
            continue
        tv = tris[ti]
        sq, bary = closest_point_triangle(pts[pi], tv[:, 0], tv[:, 1], tv[:, 2])
        keep = sq < r2
        out_p.append(pi[keep] + start)
        out_t.append(ti[keep])
        out_d.append(sq[keep])
        out_b.append(bary[keep])
    if not out_p:
        return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                np.zeros(0), np.zeros((0, 3)))
    return (np.concatenate(out_p).astype(np.int64), np.concatenate(out_t).astype(np.int64),
            np.concatenate(out_d), np.concatenate(out_b))


def nearest_triangle(points, tris):
    """Per point: squared distance to the nearest triangle, its index and barycentrics."""
    points = np.ascontiguousarray(points, dtype=float)
    tris = np.ascontiguousarray(tris, dtype=float)
    n, m = points.shape[0], tris.shape[0]
    best = np.full(n, np.inf)
    best_t = np.zeros(n, dtype=np.int64)
    best_b = np.zeros((n, 3))
    step = max(1, 65536 // max(1, m))
    for start in range(0, n, step):
        stop = min(n, start + step)
        k = stop - start
        pi = np.repeat(np.arange(k), m)
        ti = np.tile(np.arange(m), k)
        sq, bary = closest_point_triangle(points[start:stop][pi], tris[ti, 0], tris[ti, 1], tris[ti, 2])
        sq = sq.reshape(k, m)
        # lowest index among near-ties, so the pick survives rounding
        cut = sq.min(axis=1) * (1.0 + NEAR_TIE) + 1e-300
        arg = np.argmax(sq <= cut[:, None], axis=1)
        best[start:stop] = sq[np.arange(k), arg]
        best_t[start:stop] = arg
        best_b[start:stop] = bary.reshape(k, m, 3)[np.arange(k), arg]
    return best, best_t, best_b


def min_pair_sqdist(points, point_group, tris, tri_group):
    """Exhaustive minimum squared distance over all valid pairs (inf if none)."""
    points = np.ascontiguousarray(points, dtype=float)
    tris = np.ascontiguousarray(tris, dtype=float)
    point_group = np.asarray(point_group, dtype=np.int64)
    tri_group = np.asarray(tri_group, dtype=np.int64)
    m = tris.shape[0]
    best = np.inf
    step = max(1, 65536 // max(1, m))
    for start in range(0, points.shape[0], step):
        stop = min(points.shape[0], start + step)
        valid = _valid(point_group[start:stop], tri_group)
        pi, ti = np.nonzero(valid)
        if pi.size == 0:
            continue
        sq, _ = closest_point_triangle(points[start:stop][pi], tris[ti, 0], tris[ti, 1], tris[ti, 2])
        best = min(best, float(sq.min()))
    return best


def ray_crossings(origins, direction, tris):
    """Number of triangles hit by the ray ``origin + s * direction`` for ``s > 0``.

    Moller-Trumbore test with half-open edge handling left to the caller (it
    votes over several skew directions).
    """
    origins = np.ascontiguousarray(origins, dtype=float)
    tris = np.ascontiguousarray(tris, dtype=float)
    d = np.asarray(direction, dtype=float)
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    h = np.cross(d, e2)
    a = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(a) > 1e-300
    inv_a = np.where(ok, 1.0 / np.where(ok, a, 1.0), 0.0)
    counts = np.zeros(origins.shape[0], dtype=np.int64)
    for i, o in enumerate(origins):
        s = o - tris[:, 0]
        u = inv_a * np.einsum("ij,ij->i", s, h)
        q = np.cross(s, e1)
        v = inv_a * (q @ d)
        t = inv_a * np.einsum("ij,ij->i", e2, q)
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
        counts[i] = int(hit.sum())
    return counts


def snh_batch(F, mu, lam, alpha, with_hessian):
    """Stable Neo-Hookean energy density, first PK stress and dP/dF per element.

    ``F`` is ``(n, 3, 3)``. ``dPdF`` uses row-major flattening of F
    (index ``3*i + j``) and is returned unprojected; ``None`` unless requested.
    """
    F = np.ascontiguousarray(F, dtype=float)
    n = F.shape[0]
    Ic = np.einsum("nij,nij->n", F, F)
    J = np.linalg.det(F)
    f0, f1, f2 = F[:, :, 0], F[:, :, 1], F[:, :, 2]
    cof = np.stack([np.cross(f1, f2), np.cross(f2, f0), np.cross(f0, f1)], axis=2)
    psi = 0.5 * mu * (Ic - 3.0) + 0.5 * lam * (J - alpha) ** 2 - 0.5 * mu * np.log(Ic + 1.0)
    s = mu * (1.0 - 1.0 / (Ic + 1.0))
    P = s[:, None, None] * F + (lam * (J - alpha))[:, None, None] * cof
    if not with_hessian:
        return psi, P, None
    fv = F.reshape(n, 9)
    gv = cof.reshape(n, 9)
    H = s[:, None, None] * np.eye(9)[None]
    H = H + (2.0 * mu / (Ic + 1.0) ** 2)[:, None, None] * fv[:, :, None] * fv[:, None, :]
    H = H + lam * gv[:, :, None] * gv[:, None, :]
    # d2 det / dF_ij dF_kl = eps_ikm eps_jln F_mn
    H = H + (lam * (J - alpha))[:, None, None] * np.einsum(
        "ikm,jln,xmn->xijkl", _LEVI, _LEVI, F).reshape(n, 9, 9)
    return psi, P, H


def _levi_civita():
    e = np.zeros((3, 3, 3))
    e[0, 1, 2] = e[1, 2, 0] = e[2, 0, 1] = 1.0
    e[0, 2, 1] = e[2, 1, 0] = e[1, 0, 2] = -1.0
    return e


_LEVI = _levi_civita()
