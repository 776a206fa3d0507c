# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback``.

Signatures and return conventions are identical; see the fallback module for
the contract of each function.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, INFINITY, fabs

DEF NEAR_TIE = 1e-10

cnp.import_array()


cdef inline double _dot(double ax, double ay, double az, double bx, double by, double bz) nogil:
    return ax * bx + ay * by + az * bz


cdef inline double _closest(const double* p, const double* a, const double* b, const double* c,
                            double* bary) noexcept nogil:
    cdef double abx = b[0] - a[0], aby = b[1] - a[1], abz = b[2] - a[2]
    cdef double acx = c[0] - a[0], acy = c[1] - a[1], acz = c[2] - a[2]
    cdef double apx = p[0] - a[0], apy = p[1] - a[1], apz = p[2] - a[2]
    cdef double d1 = _dot(abx, aby, abz, apx, apy, apz)
    cdef double d2 = _dot(acx, acy, acz, apx, apy, apz)
    cdef double bpx = p[0] - b[0], bpy = p[1] - b[1], bpz = p[2] - b[2]
    cdef double d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
    cdef double d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
    cdef double cpx = p[0] - c[0], cpy = p[1] - c[1], cpz = p[2] - c[2]
    cdef double d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
    cdef double d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
    cdef double vc = d1 * d4 - d3 * d2
    cdef double vb = d5 * d2 - d1 * d6
    cdef double va = d3 * d6 - d5 * d4
    cdef double v, w, denom, qx, qy, qz
    if d1 <= 0 and d2 <= 0:
        bary[0] = 1.0; bary[1] = 0.0; bary[2] = 0.0
    elif d3 >= 0 and d4 <= d3:
        bary[0] = 0.0; bary[1] = 1.0; bary[2] = 0.0
    elif vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        bary[0] = 1.0 - v; bary[1] = v; bary[2] = 0.0
    elif d6 >= 0 and d5 <= d6:
        bary[0] = 0.0; bary[1] = 0.0; bary[2] = 1.0
    elif vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        bary[0] = 1.0 - w; bary[1] = 0.0; bary[2] = w
    elif va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        bary[0] = 0.0; bary[1] = 1.0 - w; bary[2] = w
    else:
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        bary[0] = 1.0 - v - w; bary[1] = v; bary[2] = w
    qx = p[0] - (bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0])
    qy = p[1] - (bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1])
    qz = p[2] - (bary[0] * a[2] + bary[1] * b[2] + bary[2] * c[2])
    return qx * qx + qy * qy + qz * qz


def closest_point_triangle(p, a, b, c):
    cdef double[:, ::1] P = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] C = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], i
    sq_arr = np.empty(n)
    bary_arr = np.empty((n, 3))
    cdef double[::1] sq = sq_arr
    cdef double[:, ::1] bary = bary_arr
    with nogil:
        for i in range(n):
            sq[i] = _closest(&P[i, 0], &A[i, 0], &B[i, 0], &C[i, 0], &bary[i, 0])
    return sq_arr, bary_arr


cdef inline bint _valid(cnp.int64_t pg, cnp.int64_t tg) nogil:
    return pg != tg and not (pg < 0 and tg < 0)


def pairs_within(points, point_group, tris, tri_group, double radius):
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, :, ::1] T = np.ascontiguousarray(tris, dtype=np.float64)
    cdef cnp.int64_t[::1] pg = np.ascontiguousarray(point_group, dtype=np.int64)
    cdef cnp.int64_t[::1] tg = np.ascontiguousarray(tri_group, dtype=np.int64)
    cdef Py_ssize_t n = P.shape[0], m = T.shape[0], i, j, k
    centers_arr = np.ascontiguousarray(np.asarray(T).mean(axis=1)) if m else np.zeros((0, 3))
    cdef double[:, ::1] ctr = centers_arr
    rad_arr = np.zeros(m)
    cdef double[::1] rad = rad_arr
    cdef double dx, dy, dz, r, best
    for j in range(m):
        best = 0.0
        for k in range(3):
            dx = T[j, k, 0] - ctr[j, 0]
            dy = T[j, k, 1] - ctr[j, 1]
            dz = T[j, k, 2] - ctr[j, 2]
            r = dx * dx + dy * dy + dz * dz
            if r > best:
                best = r
        rad[j] = sqrt(best)
    cdef double r2 = radius * radius, sq, dc
    cdef double bb[3]
    out_p = []
    out_t = []
    out_d = []
    out_b = []
    for i in range(n):
        for j in range(m):
            if not _valid(pg[i], tg[j]):
                continue
            dx = P[i, 0] - ctr[j, 0]
            dy = P[i, 1] - ctr[j, 1]
            dz = P[i, 2] - ctr[j, 2]
            dc = sqrt(dx * dx + dy * dy + dz * dz)
            if dc - rad[j] >= radius:
                continue
            sq = _closest(&P[i, 0], &T[j, 0, 0], &T[j, 1, 0], &T[j, 2, 0], bb)
            if sq < r2:
                out_p.append(i)
                out_t.append(j)
                out_d.append(sq)
                out_b.append((bb[0], bb[1], bb[2]))
    if not out_p:
        return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                np.zeros(0), np.zeros((0, 3)))
    return (np.asarray(out_p, dtype=np.int64), np.asarray(out_t, dtype=np.int64),
            np.asarray(out_d, dtype=np.float64), np.asarray(out_b, dtype=np.float64))


def nearest_triangle(points, tris):
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, :, ::1] T = np.ascontiguousarray(tris, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0], m = T.shape[0], i, j
    best_arr = np.full(n, np.inf)
    bt_arr = np.zeros(n, dtype=np.int64)
    bb_arr = np.zeros((n, 3))
    cdef double[::1] best = best_arr
    cdef cnp.int64_t[::1] bt = bt_arr
    cdef double[:, ::1] bbo = bb_arr
    cdef double bb[3]
    cdef double sq
    cdef double cut
    with nogil:
        for i in range(n):
            for j in range(m):
                sq = _closest(&P[i, 0], &T[j, 0, 0], &T[j, 1, 0], &T[j, 2, 0], bb)
                if sq < best[i]:
                    best[i] = sq
            # lowest index among near-ties, so the pick survives rounding
            cut = best[i] * (1.0 + NEAR_TIE) + 1e-300
            for j in range(m):
                sq = _closest(&P[i, 0], &T[j, 0, 0], &T[j, 1, 0], &T[j, 2, 0], bb)
                if sq <= cut:
                    best[i] = sq
                    bt[i] = j
                    bbo[i, 0] = bb[0]; bbo[i, 1] = bb[1]; bbo[i, 2] = bb[2]
                    break
    return best_arr, bt_arr, bb_arr


def min_pair_sqdist(points, point_group, tris, tri_group):
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, :, ::1] T = np.ascontiguousarray(tris, dtype=np.float64)
    cdef cnp.int64_t[::1] pg = np.ascontiguousarray(point_group, dtype=np.int64)
    cdef cnp.int64_t[::1] tg = np.ascontiguousarray(tri_group, dtype=np.int64)
    cdef Py_ssize_t n = P.shape[0], m = T.shape[0], i, j
    cdef double best = INFINITY, sq
    cdef double bb[3]
    with nogil:
        for i in range(n):
            for j in range(m):
                if not _valid(pg[i], tg[j]):
                    continue
                sq = _closest(&P[i, 0], &T[j, 0, 0], &T[j, 1, 0], &T[j, 2, 0], bb)
                if sq < best:
                    best = sq
    return best


def ray_crossings(origins, direction, tris):
    cdef double[:, ::1] O = np.ascontiguousarray(origins, dtype=np.float64)
    cdef double[:, :, ::1] T = np.ascontiguousarray(tris, dtype=np.float64)
    cdef double[::1] d = np.ascontiguousarray(direction, dtype=np.float64)
    cdef Py_ssize_t n = O.shape[0], m = T.shape[0], i, j
    counts_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef double e1x, e1y, e1z, e2x, e2y, e2z, hx, hy, hz, a, f, sx, sy, sz, u, v, t, qx, qy, qz
    with nogil:
        for j in range(m):
            e1x = T[j, 1, 0] - T[j, 0, 0]; e1y = T[j, 1, 1] - T[j, 0, 1]; e1z = T[j, 1, 2] - T[j, 0, 2]
            e2x = T[j, 2, 0] - T[j, 0, 0]; e2y = T[j, 2, 1] - T[j, 0, 1]; e2z = T[j, 2, 2] - T[j, 0, 2]
            hx = d[1] * e2z - d[2] * e2y
            hy = d[2] * e2x - d[0] * e2z
            hz = d[0] * e2y - d[1] * e2x
            a = e1x * hx + e1y * hy + e1z * hz
            if fabs(a) <= 1e-300:
                continue
            f = 1.0 / a
            for i in range(n):
                sx = O[i, 0] - T[j, 0, 0]; sy = O[i, 1] - T[j, 0, 1]; sz = O[i, 2] - T[j, 0, 2]
                u = f * (sx * hx + sy * hy + sz * hz)
                if u < 0:
                    continue
                qx = sy * e1z - sz * e1y
                qy = sz * e1x - sx * e1z
                qz = sx * e1y - sy * e1x
                v = f * (d[0] * qx + d[1] * qy + d[2] * qz)
                if v < 0 or u + v > 1:
                    continue
                t = f * (e2x * qx + e2y * qy + e2z * qz)
                if t > 0:
                    counts[i] += 1
    return counts_arr


cdef double LEVI[3][3][3]
cdef int _a, _b, _c
for _a in range(3):
    for _b in range(3):
        for _c in range(3):
            LEVI[_a][_b][_c] = 0.0
LEVI[0][1][2] = 1.0; LEVI[1][2][0] = 1.0; LEVI[2][0][1] = 1.0
LEVI[0][2][1] = -1.0; LEVI[2][1][0] = -1.0; LEVI[1][0][2] = -1.0


def snh_batch(F, double mu, double lam, double alpha, bint with_hessian):
    cdef double[:, :, ::1] Fv = np.ascontiguousarray(F, dtype=np.float64)
    cdef Py_ssize_t n = Fv.shape[0], e, i, j, k, l, m, q
    psi_arr = np.empty(n)
    P_arr = np.empty((n, 3, 3))
    cdef double[::1] psi = psi_arr
    cdef double[:, :, ::1] P = P_arr
    cdef double[:, :, ::1] H
    if with_hessian:
        H_arr = np.empty((n, 9, 9))
        H = H_arr
    else:
        H_arr = None
    cdef double Ic, J, s, c2, ljm, acc
    cdef double cof[3][3]
    cdef double f[3][3]
    with nogil:
        for e in range(n):
            for i in range(3):
                for j in range(3):
                    f[i][j] = Fv[e, i, j]
            Ic = 0.0
            for i in range(3):
                for j in range(3):
                    Ic = Ic + f[i][j] * f[i][j]
            # cofactor columns: c0 = f1 x f2, c1 = f2 x f0, c2 = f0 x f1 (f_k = column k)
            cof[0][0] = f[1][1] * f[2][2] - f[2][1] * f[1][2]
            cof[1][0] = f[2][1] * f[0][2] - f[0][1] * f[2][2]
            cof[2][0] = f[0][1] * f[1][2] - f[1][1] * f[0][2]
            cof[0][1] = f[1][2] * f[2][0] - f[2][2] * f[1][0]
            cof[1][1] = f[2][2] * f[0][0] - f[0][2] * f[2][0]
            cof[2][1] = f[0][2] * f[1][0] - f[1][2] * f[0][0]
            cof[0][2] = f[1][0] * f[2][1] - f[2][0] * f[1][1]
            cof[1][2] = f[2][0] * f[0][1] - f[0][0] * f[2][1]
            cof[2][2] = f[0][0] * f[1][1] - f[1][0] * f[0][1]
            J = f[0][0] * cof[0][0] + f[1][0] * cof[1][0] + f[2][0] * cof[2][0]
            psi[e] = 0.5 * mu * (Ic - 3.0) + 0.5 * lam * (J - alpha) * (J - alpha) - 0.5 * mu * log(Ic + 1.0)
            s = mu * (1.0 - 1.0 / (Ic + 1.0))
            ljm = lam * (J - alpha)
            for i in range(3):
                for j in range(3):
                    P[e, i, j] = s * f[i][j] + ljm * cof[i][j]
            if with_hessian:
                c2 = 2.0 * mu / ((Ic + 1.0) * (Ic + 1.0))
                for i in range(3):
                    for j in range(3):
                        for k in range(3):
                            for l in range(3):
                                acc = c2 * f[i][j] * f[k][l] + lam * cof[i][j] * cof[k][l]
                                if i == k and j == l:
                                    acc = acc + s
                                for m in range(3):
                                    for q in range(3):
                                        acc = acc + ljm * LEVI[i][k][m] * LEVI[j][l][q] * f[m][q]
                                H[e, 3 * i + j, 3 * k + l] = acc
    return psi_arr, P_arr, H_arr
