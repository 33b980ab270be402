"""Bounding-volume hierarchy over triangles.

Built once with a median split on the widest centroid axis. Queries go
through the numba kernels when available; otherwise a vectorised numpy
traversal walks the tree breadth-first for a whole batch of rays.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._kernels import nb_geom

LEAF_SIZE = 4
_CHUNK = 4096


@dataclass(frozen=True)
class BVH:
    bmin: np.ndarray
    bmax: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    tri_face: np.ndarray

    @property
    def n_nodes(self):
        return self.bmin.shape[0]

    def kernel_args(self):
        return (self.bmin, self.bmax, self.left, self.right, self.start, self.count, self.order,
                self.v0, self.e1, self.e2)

    # -- batched queries -------------------------------------------------
    def nearest(self, O, D, tmin, tmax):
        """Nearest hit per ray; returns ``(t, tri)`` with -1 where missed."""
        O, D = _f64(O), _f64(D)
        tmin = np.broadcast_to(np.asarray(tmin, dtype=np.float64), O.shape[:1]).copy()
        tmax = np.broadcast_to(np.asarray(tmax, dtype=np.float64), O.shape[:1]).copy()
        if _backend.USE_NUMBA:
            return nb_geom.nearest_batch(O, D, tmin, tmax, *self.kernel_args())
        return _np_nearest(self, O, D, tmin, tmax)

    def blocked(self, P, Q, eps):
        """True where the open segment P+eps .. Q-eps crosses any triangle."""
        P, Q = _f64(P), _f64(Q)
        if _backend.USE_NUMBA:
            return nb_geom.blocked_batch(P, Q, float(eps), *self.kernel_args())
        return _np_blocked(self, P, Q, eps)

    def face_hits(self, O, D, tmax):
        """Count of distinct faces crossed by each ray over ``[0, tmax]``."""
        O, D = _f64(O), _f64(D)
        if _backend.USE_NUMBA:
            return nb_geom.face_hits_batch(O, D, float(tmax), *self.kernel_args(), self.tri_face)
        return _np_face_hits(self, O, D, tmax)


def _f64(a):
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, 3))


def build_bvh(v0, v1, v2, tri_face, leaf_size=LEAF_SIZE):
    v0 = np.ascontiguousarray(v0, dtype=np.float64).reshape(-1, 3)
    v1 = np.ascontiguousarray(v1, dtype=np.float64).reshape(-1, 3)
    v2 = np.ascontiguousarray(v2, dtype=np.float64).reshape(-1, 3)
    n = v0.shape[0]
    e1 = np.ascontiguousarray(v1 - v0)
    e2 = np.ascontiguousarray(v2 - v0)
    tri_face = np.ascontiguousarray(tri_face, dtype=np.int64)
    if n == 0:
        z3 = np.zeros((0, 3))
        zi = np.zeros(0, dtype=np.int64)
        return BVH(z3, z3, zi, zi, zi, zi, zi, v0, e1, e2, tri_face)

    lo = np.minimum(np.minimum(v0, v1), v2)
    hi = np.maximum(np.maximum(v0, v1), v2)
    cen = (lo + hi) / 2.0

    bmin, bmax, left, right, start, count = [], [], [], [], [], []
    order = np.arange(n, dtype=np.int64)

    def build(b, e):
        # depth-first: the left child always directly follows its parent
        node = len(bmin)
        idx = order[b:e]
        bmin.append(lo[idx].min(axis=0))
        bmax.append(hi[idx].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(b)
        count.append(e - b)
        if e - b <= leaf_size:
            return node
        c = cen[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        order[b:e] = idx[np.argsort(c[:, axis], kind="stable")]
        mid = b + (e - b) // 2
        count[node] = 0
        left[node] = build(b, mid)
        right[node] = build(mid, e)
        return node

    build(0, n)

    def arr(x, dt=np.float64):
        return np.ascontiguousarray(np.array(x, dtype=dt))

    return BVH(arr(bmin), arr(bmax), arr(left, np.int64), arr(right, np.int64),
               arr(start, np.int64), arr(count, np.int64), order, v0, e1, e2, tri_face)


# -- numpy fallback ------------------------------------------------------

def _safe_inv(D):
    with np.errstate(divide="ignore"):
        inv = 1.0 / D
    zero = D == 0.0
    inv[zero] = np.copysign(1e300, D[zero])
    return inv


def _leaf_pairs(bvh, O, inv, tmin, tmax):
    """(ray, triangle) candidate pairs from a breadth-first traversal."""
    rays = np.arange(O.shape[0])
    nodes = np.zeros(O.shape[0], dtype=np.int64)
    out_r, out_n = [], []
    while rays.size:
        o = O[rays]
        iv = inv[rays]
        ta = (bvh.bmin[nodes] - o) * iv
        tb = (bvh.bmax[nodes] - o) * iv
        t0 = np.maximum(np.minimum(ta, tb).max(axis=1), tmin[rays])
        t1 = np.minimum(np.maximum(ta, tb).min(axis=1), tmax[rays])
        hit = t0 <= t1
        rays, nodes = rays[hit], nodes[hit]
        leaf = bvh.left[nodes] < 0
        out_r.append(rays[leaf])
        out_n.append(nodes[leaf])
        inner_r, inner_n = rays[~leaf], nodes[~leaf]
        rays = np.concatenate([inner_r, inner_r])
        nodes = np.concatenate([bvh.left[inner_n], bvh.right[inner_n]])
    lr = np.concatenate(out_r) if out_r else np.zeros(0, dtype=np.int64)
    ln = np.concatenate(out_n) if out_n else np.zeros(0, dtype=np.int64)
    counts = bvh.count[ln]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    offs = np.repeat(bvh.start[ln] - (np.cumsum(counts) - counts), counts)
    tri = bvh.order[offs + np.arange(total)]
    return np.repeat(lr, counts), tri


def tri_hit_np(O, D, v0, e1, e2, tmin, tmax):
    """Vectorised two-sided Moller-Trumbore; t or -1 per row."""
    p = np.cross(D, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) >= nb_geom.DET_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        tv = O - v0
        u = np.einsum("ij,ij->i", tv, p) * inv
        q = np.cross(tv, e1)
        v = np.einsum("ij,ij->i", D, q) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
        tol = nb_geom.BARY_TOL
        ok &= (u >= -tol) & (u <= 1.0 + tol) & (v >= -tol) & (u + v <= 1.0 + tol)
        ok &= (t >= tmin) & (t <= tmax)
    return np.where(ok, t, -1.0)


def _pair_hits(bvh, O, D, tmin, tmax):
    inv = _safe_inv(D)
    r, tri = _leaf_pairs(bvh, O, inv, tmin, tmax)
    if r.size == 0:
        return r, tri, np.zeros(0)
    t = tri_hit_np(O[r], D[r], bvh.v0[tri], bvh.e1[tri], bvh.e2[tri], tmin[r], tmax[r])
    keep = t >= 0.0
    return r[keep], tri[keep], t[keep]


def _chunks(n):
    for b in range(0, n, _CHUNK):
        yield b, min(n, b + _CHUNK)


def _np_nearest(bvh, O, D, tmin, tmax):
    n = O.shape[0]
    ts = np.full(n, -1.0)
    idx = np.full(n, -1, dtype=np.int64)
    if bvh.n_nodes == 0:
        return ts, idx
    for b, e in _chunks(n):
        r, tri, t = _pair_hits(bvh, O[b:e], D[b:e], tmin[b:e], tmax[b:e])
        if r.size == 0:
            continue
        srt = np.lexsort((tri, t, r))
        r, tri, t = r[srt], tri[srt], t[srt]
        first = np.ones(r.size, dtype=bool)
        first[1:] = r[1:] != r[:-1]
        ts[b + r[first]] = t[first]
        idx[b + r[first]] = tri[first]
    return ts, idx


def _np_blocked(bvh, P, Q, eps):
    n = P.shape[0]
    out = np.zeros(n, dtype=bool)
    if bvh.n_nodes == 0 or n == 0:
        return out
    d = Q - P
    ln = np.linalg.norm(d, axis=1)
    live = ln > 2.0 * eps
    if not live.any():
        return out
    sel = np.nonzero(live)[0]
    D = d[sel] / ln[sel, None]
    for b, e in _chunks(sel.size):
        r, _, _ = _pair_hits(bvh, P[sel[b:e]], D[b:e], np.full(e - b, eps), ln[sel[b:e]] - eps)
        out[sel[b + np.unique(r)]] = True
    return out


def _np_face_hits(bvh, O, D, tmax):
    n = O.shape[0]
    out = np.zeros(n, dtype=np.int64)
    if bvh.n_nodes == 0:
        return out
    for b, e in _chunks(n):
        r, tri, _ = _pair_hits(bvh, O[b:e], D[b:e], np.zeros(e - b), np.full(e - b, tmax))
        if r.size == 0:
            continue
        pairs = np.unique(np.stack([r, bvh.tri_face[tri]], axis=1), axis=0)
        out[b:e] += np.bincount(pairs[:, 0], minlength=e - b)
    return out
