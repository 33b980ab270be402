"""Ray/triangle and BVH traversal kernels (numba, or plain python when disabled)."""

import math

import numpy as np

from .._backend import njit, prange

BARY_TOL = 1e-12
DET_TOL = 1e-14
STACK = 128


@njit(cache=True)
def tri_hit(o, d, i, v0, e1, e2, tmin, tmax):
    """Moller-Trumbore, two-sided; returns t or -1."""
    px = d[1] * e2[i, 2] - d[2] * e2[i, 1]
    py = d[2] * e2[i, 0] - d[0] * e2[i, 2]
    pz = d[0] * e2[i, 1] - d[1] * e2[i, 0]
    det = e1[i, 0] * px + e1[i, 1] * py + e1[i, 2] * pz
    if abs(det) < DET_TOL:
        return -1.0
    inv = 1.0 / det
    tx = o[0] - v0[i, 0]
    ty = o[1] - v0[i, 1]
    tz = o[2] - v0[i, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -BARY_TOL or u > 1.0 + BARY_TOL:
        return -1.0
    qx = ty * e1[i, 2] - tz * e1[i, 1]
    qy = tz * e1[i, 0] - tx * e1[i, 2]
    qz = tx * e1[i, 1] - ty * e1[i, 0]
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if v < -BARY_TOL or u + v > 1.0 + BARY_TOL:
        return -1.0
    t = (e2[i, 0] * qx + e2[i, 1] * qy + e2[i, 2] * qz) * inv
    if t < tmin or t > tmax:
        return -1.0
    return t


@njit(cache=True)
def box_hit(o, inv_d, bmin, bmax, j, tmin, tmax):
    t0 = tmin
    t1 = tmax
    for a in range(3):
        ta = (bmin[j, a] - o[a]) * inv_d[a]
        tb = (bmax[j, a] - o[a]) * inv_d[a]
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return False
    return True


@njit(cache=True)
def _inv_dir(d):
    inv = np.empty(3)
    for a in range(3):
        if d[a] != 0.0:
            inv[a] = 1.0 / d[a]
        else:
            inv[a] = math.copysign(1e300, d[a])
    return inv


@njit(cache=True)
def bvh_nearest(o, d, tmin, tmax, bmin, bmax, left, right, start, count, order, v0, e1, e2):
    """Nearest hit as (t, triangle); (-1, -1) when nothing is hit."""
    best_t = tmax
    best_i = -1
    if bmin.shape[0] == 0:
        return -1.0, -1
    inv = _inv_dir(d)
    stack = np.empty(STACK, dtype=np.int64)
    top = 0
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        j = stack[top]
        if not box_hit(o, inv, bmin, bmax, j, tmin, best_t):
            continue
        if left[j] < 0:
            for k in range(start[j], start[j] + count[j]):
                i = order[k]
                t = tri_hit(o, d, i, v0, e1, e2, tmin, best_t)
                if t >= 0.0:
                    if t < best_t or (t == best_t and (best_i < 0 or i < best_i)):
                        best_t = t
                        best_i = i
        else:
            stack[top] = right[j]
            stack[top + 1] = left[j]
            top += 2
    if best_i < 0:
        return -1.0, -1
    return best_t, best_i


@njit(cache=True)
def bvh_any(o, d, tmin, tmax, bmin, bmax, left, right, start, count, order, v0, e1, e2):
    if bmin.shape[0] == 0 or tmax <= tmin:
        return False
    inv = _inv_dir(d)
    stack = np.empty(STACK, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        j = stack[top]
        if not box_hit(o, inv, bmin, bmax, j, tmin, tmax):
            continue
        if left[j] < 0:
            for k in range(start[j], start[j] + count[j]):
                if tri_hit(o, d, order[k], v0, e1, e2, tmin, tmax) >= 0.0:
                    return True
        else:
            stack[top] = right[j]
            stack[top + 1] = left[j]
            top += 2
    return False


@njit(cache=True)
def segment_blocked(p, q, eps, bmin, bmax, left, right, start, count, order, v0, e1, e2):
    d = np.empty(3)
    ln = 0.0
    for a in range(3):
        d[a] = q[a] - p[a]
        ln += d[a] * d[a]
    ln = math.sqrt(ln)
    if ln <= 2.0 * eps:
        return False
    for a in range(3):
        d[a] /= ln
    return bvh_any(p, d, eps, ln - eps, bmin, bmax, left, right, start, count, order, v0, e1, e2)


@njit(cache=True)
def bvh_face_hits(o, d, tmin, tmax, bmin, bmax, left, right, start, count, order, v0, e1, e2,
                  tri_face):
    """Number of distinct faces crossed by the ray."""
    if bmin.shape[0] == 0:
        return 0
    inv = _inv_dir(d)
    seen = np.empty(256, dtype=np.int64)
    nseen = 0
    stack = np.empty(STACK, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        j = stack[top]
        if not box_hit(o, inv, bmin, bmax, j, tmin, tmax):
            continue
        if left[j] < 0:
            for k in range(start[j], start[j] + count[j]):
                i = order[k]
                if tri_hit(o, d, i, v0, e1, e2, tmin, tmax) >= 0.0:
                    f = tri_face[i]
                    dup = False
                    for s in range(nseen):
                        if seen[s] == f:
                            dup = True
                            break
                    if not dup and nseen < 256:
                        seen[nseen] = f
                        nseen += 1
        else:
            stack[top] = right[j]
            stack[top + 1] = left[j]
            top += 2
    return nseen


@njit(parallel=True, cache=True)
def nearest_batch(O, D, tmin, tmax, bmin, bmax, left, right, start, count, order, v0, e1, e2):
    n = O.shape[0]
    ts = np.empty(n)
    idx = np.empty(n, dtype=np.int64)
    for r in prange(n):
        t, i = bvh_nearest(O[r], D[r], tmin[r], tmax[r], bmin, bmax, left, right, start, count,
                           order, v0, e1, e2)
        ts[r] = t
        idx[r] = i
    return ts, idx


@njit(parallel=True, cache=True)
def blocked_batch(P, Q, eps, bmin, bmax, left, right, start, count, order, v0, e1, e2):
    n = P.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    for r in prange(n):
        out[r] = segment_blocked(P[r], Q[r], eps, bmin, bmax, left, right, start, count, order,
                                 v0, e1, e2)
    return out


@njit(parallel=True, cache=True)
def face_hits_batch(O, D, tmax, bmin, bmax, left, right, start, count, order, v0, e1, e2, tri_face):
    n = O.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for r in prange(n):
        out[r] = bvh_face_hits(O[r], D[r], 0.0, tmax, bmin, bmax, left, right, start, count,
                               order, v0, e1, e2, tri_face)
    return out
