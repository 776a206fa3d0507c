"""Independent reference implementations used only by the tests.

Each one takes a different route from the package code: explicit matrix
entries for the kinematic chain, solid angles for inside tests, and
exhaustive closed-form distances for contact checks.
"""
import math

import numpy as np


def oracle_link(alpha, a, theta, d):
    # written out entry by entry from the modified D-H convention
    T = np.zeros((4, 4))
    T[0] = [math.cos(theta), -math.sin(theta), 0, a]
    T[1] = [math.sin(theta) * math.cos(alpha), math.cos(theta) * math.cos(alpha), -math.sin(alpha),
            -math.sin(alpha) * d]
    T[2] = [math.sin(theta) * math.sin(alpha), math.cos(theta) * math.sin(alpha), math.cos(alpha),
            math.cos(alpha) * d]
    T[3, 3] = 1
    return T


def oracle_tip(g, ang):
    T = np.eye(4)
    T[0, 3], T[1, 3] = g.dx, g.dy
    table = [(0, 0, ang.beta, 0), (math.pi / 2, g.l1, ang.theta1, 0), (0, g.l2, ang.theta2, 0)]
    if g.l3 is not None:
        table.append((0, g.l3, ang.theta3, 0))
    for row in table:
        T = T @ oracle_link(*row)
    return T


def winding_number(points, tris_xyz):
    """Generalized winding number by summed signed solid angles (Van Oosterom and Strackee)."""
    pts = np.atleast_2d(points)
    out = np.empty(len(pts))
    for k, p in enumerate(pts):
        a = tris_xyz[:, 0] - p
        b = tris_xyz[:, 1] - p
        c = tris_xyz[:, 2] - p
        la, lb, lc = (np.linalg.norm(v, axis=1) for v in (a, b, c))
        num = np.einsum("ij,ij->i", a, np.cross(b, c))
        den = (la * lb * lc + np.einsum("ij,ij->i", a, b) * lc + np.einsum("ij,ij->i", b, c) * la
               + np.einsum("ij,ij->i", c, a) * lb)
        out[k] = 2.0 * np.arctan2(num, den).sum() / (4.0 * math.pi)
    return out


def point_triangle_distance(p, a, b, c):
    """Exact distance from p to triangle abc by enumerating the seven Voronoi regions."""
    n = np.cross(b - a, c - a)
    nn = n @ n
    # interior region: projection has all barycentrics in [0, 1]
    q = p - (p - a) @ n / nn * n
    u = np.cross(c - b, q - b) @ n / nn
    v = np.cross(a - c, q - c) @ n / nn
    w = 1.0 - u - v
    if u >= 0 and v >= 0 and w >= 0:
        return float(np.linalg.norm(p - q))
    best = math.inf
    for s, e in ((a, b), (b, c), (c, a)):
        d = e - s
        t = min(max((p - s) @ d / (d @ d), 0.0), 1.0)
        best = min(best, float(np.linalg.norm(p - (s + t * d))))
    return best


def brute_min_distance(points, tris_xyz):
    return min(point_triangle_distance(p, *t) for p in points for t in tris_xyz)


def brute_distance_to_surface(p, tris_xyz):
    return min(point_triangle_distance(np.asarray(p, dtype=float), *t) for t in tris_xyz)


def inside_with_boundary(p, tris_xyz):
    """Winding-number inside test; points within 1e-9 of the bounding diagonal of the surface count as inside."""
    flat = tris_xyz.reshape(-1, 3)
    tol = 1e-9 * float(np.linalg.norm(flat.max(axis=0) - flat.min(axis=0)))
    if brute_distance_to_surface(p, tris_xyz) <= tol:
        return True
    return bool(winding_number(p, tris_xyz)[0] > 0.5)


def _seg_sqdist(P, S, E):
    d = E - S
    t = np.clip(np.einsum("ij,ij->i", P - S, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    r = P - (S + t[:, None] * d)
    return np.einsum("ij,ij->i", r, r)


def pairwise_point_triangle_sqdist(P, A, B, C):
    """Row-wise squared distance, Voronoi enumeration as in ``point_triangle_distance``."""
    n = np.cross(B - A, C - A)
    nn = np.einsum("ij,ij->i", n, n)
    h = np.einsum("ij,ij->i", P - A, n) / nn
    Q = P - h[:, None] * n
    u = np.einsum("ij,ij->i", np.cross(C - B, Q - B), n) / nn
    v = np.einsum("ij,ij->i", np.cross(A - C, Q - C), n) / nn
    w = 1.0 - u - v
    interior = (u >= 0) & (v >= 0) & (w >= 0)
    edge = np.minimum(np.minimum(_seg_sqdist(P, A, B), _seg_sqdist(P, B, C)), _seg_sqdist(P, C, A))
    return np.where(interior, h * h * nn, edge)


def exhaustive_min_distance(points, tris_xyz, chunk=200_000):
    """Minimum over every point/triangle combination of two sets."""
    m = len(tris_xyz)
    best = np.inf
    rows_per = max(1, chunk // max(m, 1))
    for s in range(0, len(points), rows_per):
        P = np.repeat(points[s:s + rows_per], m, axis=0)
        T = np.tile(tris_xyz, (min(rows_per, len(points) - s), 1, 1))
        best = min(best, float(pairwise_point_triangle_sqdist(P, T[:, 0], T[:, 1], T[:, 2]).min()))
    return np.sqrt(best)
