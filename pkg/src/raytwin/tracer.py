"""Path enumeration: line of sight, image-method reflections, single-edge diffraction.

Two engines compute the same per-cell sums. The numpy engine vectorises over
receiver points for one contribution (a face sequence or an edge) at a time;
the compiled engine in ``_kernels.nb_sweep`` loops cells in parallel and walks
the contributions per cell. Both visit contributions in dedup-key order:
line of sight, reflections by (order, face indices), then edges by index.

Per-link queries (``trace_*``) always use the numpy engine so they can report
full interaction lists.
"""

import math
import warnings
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _backend, antenna, em

MAX_ORDER = 3
DEFAULT_CARRIER_HZ = 10e9
FRONT_TOL = 1e-9
FACE_TOL = 1e-9
EDGE_TOL = 1e-9
BEAM_TOL = 1e-9
DIFFRACTION_MODELS = ("utd", "knife_edge")
_CHUNK = 2048


class PathTruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TracerConfig:
    max_reflection_order: int = 3
    diffraction_enabled: bool = True
    max_paths_per_link: int = 10_000
    path_floor_db: float = -250.0
    occlusion_epsilon: float = 1e-4
    diffraction_model: str = "utd"

    def __post_init__(self):
        if not 0 <= self.max_reflection_order <= MAX_ORDER:
            raise ValueError(f"max_reflection_order must lie in [0, {MAX_ORDER}]")
        if self.max_paths_per_link < 1:
            raise ValueError("max_paths_per_link must be >= 1")
        if self.occlusion_epsilon <= 0:
            raise ValueError("occlusion_epsilon must be positive")
        if self.diffraction_model not in DIFFRACTION_MODELS:
            raise ValueError(f"diffraction_model must be one of {DIFFRACTION_MODELS}")

    @property
    def floor_linear(self):
        return 10.0 ** (self.path_floor_db / 10.0)


@dataclass(frozen=True)
class Interaction:
    kind: str  # "reflection" or "diffraction"
    point: np.ndarray
    index: int  # face or edge index
    cos_incidence: float


@dataclass(frozen=True)
class PropagationPath:
    tx_index: int
    interactions: tuple
    total_length: float
    amplitude: complex

    @property
    def key(self):
        return tuple((i.kind, i.index) for i in self.interactions)

    @property
    def kind(self):
        if not self.interactions:
            return "los"
        return self.interactions[0].kind


@dataclass(frozen=True)
class Source:
    position: np.ndarray
    antenna: antenna.AntennaConfig
    orientation: antenna.Orientation
    carrier_hz: float
    index: int = 0


def as_source(tx, carrier_hz=None, index=0):
    """Accept a Transmitter-like object or a bare position (isotropic 0 dBi)."""
    if hasattr(tx, "position"):
        return Source(np.asarray(tx.position, dtype=np.float64), tx.antenna, tx.orientation,
                      float(carrier_hz or tx.carrier_hz), int(getattr(tx, "index", index)))
    return Source(np.asarray(tx, dtype=np.float64), antenna.AntennaConfig.isotropic(),
                  antenna.Orientation(0.0, 0.0), float(carrier_hz or DEFAULT_CARRIER_HZ), index)


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _unit(v):
    return v / np.sqrt(_dot(v, v))[..., None]


class SceneTables:
    """Flat, frequency-resolved arrays derived from a scene."""

    _cache = weakref.WeakKeyDictionary()

    def __init__(self, scene, f_hz):
        self.scene = scene
        self.f_hz = float(f_hz)
        self.k = 2.0 * math.pi * f_hz / em.C0
        self.lam = em.C0 / f_hz
        faces = scene.faces
        nf = len(faces)
        self.face_n = np.ascontiguousarray(scene.face_normals.reshape(nf, 3))
        self.face_d = np.ascontiguousarray(scene.face_offsets.reshape(nf))
        accel = scene.accel
        tmax = max((len(f.source_triangles) for f in faces), default=1)
        self.face_tri = np.zeros((nf, tmax, 3, 3))
        self.face_ntri = np.zeros(nf, dtype=np.int64)
        verts = []
        for i, f in enumerate(faces):
            tri = np.array(f.source_triangles, dtype=np.int64)
            self.face_ntri[i] = tri.size
            self.face_tri[i, :tri.size, 0] = accel.v0[tri]
            self.face_tri[i, :tri.size, 1] = accel.e1[tri]
            self.face_tri[i, :tri.size, 2] = accel.e2[tri]
            v0 = accel.v0[tri]
            verts.append(np.unique(np.concatenate([v0, v0 + accel.e1[tri], v0 + accel.e2[tri]]),
                                   axis=0))
        vmax = max((len(v) for v in verts), default=1)
        # pad with the first vertex; duplicates never change an all/any test
        self.face_verts = np.zeros((nf, vmax, 3))
        for i, v in enumerate(verts):
            self.face_verts[i] = np.concatenate([v, np.repeat(v[:1], vmax - len(v), axis=0)])
        self.face_eta = np.array(
            [em.material_permittivity(scene.materials[f.material_name], f_hz) for f in faces],
            dtype=np.complex128).reshape(nf)

        if nf:
            dist = np.einsum("jvk,ik->ijv", self.face_verts, self.face_n) - self.face_d[:, None, None]
            front = (dist > FRONT_TOL).any(axis=2)  # front[i, j]: face j reaches in front of i
            self.vis = front & front.T
            np.fill_diagonal(self.vis, False)
        else:
            self.vis = np.zeros((0, 0), dtype=bool)

        edges = scene.edges
        ne = len(edges)
        self.e_o = np.array([e.origin for e in edges]).reshape(ne, 3)
        self.e_d = np.array([e.direction for e in edges]).reshape(ne, 3)
        self.e_len = np.array([e.length for e in edges], dtype=np.float64).reshape(ne)
        self.e_n0 = np.array([e.normal0 for e in edges]).reshape(ne, 3)
        self.e_n1 = np.array([e.normal1 for e in edges]).reshape(ne, 3)
        self.e_t0 = np.array([e.tangent0 for e in edges]).reshape(ne, 3)
        self.e_nw = np.array([e.exterior_angle / math.pi for e in edges],
                             dtype=np.float64).reshape(ne)
        self._trees = {}

    @classmethod
    def for_scene(cls, scene, f_hz):
        per_scene = cls._cache.setdefault(scene, {})
        key = float(f_hz)
        if key not in per_scene:
            per_scene[key] = cls(scene, f_hz)
        return per_scene[key]

    def image_tree(self, tx_pos, max_order):
        key = (tuple(np.asarray(tx_pos, dtype=np.float64).tolist()), int(max_order))
        tree = self._trees.get(key)
        if tree is None:
            tree = build_image_tree(self, tx_pos, max_order)
            if len(self._trees) > 64:
                self._trees.clear()
            self._trees[key] = tree
        return tree


@dataclass(frozen=True)
class ImageTree:
    faces: np.ndarray  # (S, MAX_ORDER), padded with -1
    lengths: np.ndarray  # (S,)
    images: np.ndarray  # (S, MAX_ORDER, 3); images[s, j] is the source mirrored j+1 times

    def __len__(self):
        return int(self.lengths.shape[0])

    def sequence(self, s):
        return tuple(int(f) for f in self.faces[s, :self.lengths[s]])


def mirror_points(p, n, d):
    return p - 2.0 * (_dot(p, n) - d)[..., None] * n


def _beam_excludes(tables, apex, prev_face, cands):
    """Candidates that cannot be reached by rays from ``apex`` through ``prev_face``.

    Conservative: a candidate is dropped only if, for every source triangle of
    the previous face, all of its vertices sit strictly outside one side plane
    of the cone through that triangle.
    """
    nt = tables.face_ntri[prev_face]
    tri = tables.face_tri[prev_face, :nt]
    corners = np.stack([tri[:, 0], tri[:, 0] + tri[:, 1], tri[:, 0] + tri[:, 2]], axis=1) - apex
    verts = tables.face_verts[cands] - apex  # (C, V, 3)
    tri_ex = np.zeros((nt, cands.size), dtype=bool)
    for s in range(3):
        a = corners[:, s]
        b = corners[:, (s + 1) % 3]
        c = corners[:, (s + 2) % 3]
        nn = np.cross(a, b)
        nrm = np.sqrt(_dot(nn, nn))
        side = _dot(nn, c)
        good = (nrm > 0) & (np.abs(side) > BEAM_TOL * nrm * np.sqrt(_dot(c, c)))
        with np.errstate(invalid="ignore", divide="ignore"):
            nn = nn * (np.sign(side) / nrm)[:, None]
        val = np.einsum("tk,cvk->tcv", nn, verts)
        out = (val < -BEAM_TOL).all(axis=2) & good[:, None]
        tri_ex |= out
    return tri_ex.all(axis=0)


def build_image_tree(tables, tx_pos, max_order):
    """All face sequences that survive the source-side pruning, in key order."""
    tx = np.asarray(tx_pos, dtype=np.float64)
    nf = tables.face_n.shape[0]
    seqs, imgs = [], []
    if max_order > 0 and nf:
        front = tables.face_n @ tx - tables.face_d > FRONT_TOL
        level = []
        for f in np.nonzero(front)[0]:
            level.append(((int(f),), [mirror_points(tx, tables.face_n[f], tables.face_d[f])]))
        for order in range(1, max_order + 1):
            seqs.extend(s for s, _ in level)
            imgs.extend(i for _, i in level)
            if order == max_order:
                break
            nxt = []
            for seq, images in level:
                prev = seq[-1]
                apex = images[-1]
                ok = tables.face_n @ apex - tables.face_d > FRONT_TOL
                ok &= tables.vis[prev]
                ok[prev] = False
                cands = np.nonzero(ok)[0]
                if cands.size:
                    cands = cands[~_beam_excludes(tables, apex, prev, cands)]
                for f in cands:
                    img = mirror_points(apex, tables.face_n[f], tables.face_d[f])
                    nxt.append((seq + (int(f),), images + [img]))
            level = nxt
    s = len(seqs)
    faces = np.full((s, MAX_ORDER), -1, dtype=np.int64)
    lengths = np.zeros(s, dtype=np.int64)
    images = np.zeros((s, MAX_ORDER, 3))
    for i, (seq, im) in enumerate(zip(seqs, imgs)):
        lengths[i] = len(seq)
        faces[i, :len(seq)] = seq
        images[i, :len(seq)] = im
    return ImageTree(faces, lengths, images)


# -- numpy engine ----------------------------------------------------------

class PathBatch(NamedTuple):
    kind: str
    index: tuple  # dedup key: () for LoS, face sequence, or (edge,)
    cells: np.ndarray
    amplitude: np.ndarray
    length: np.ndarray
    points: np.ndarray  # (n_interactions, n, 3)
    cos: np.ndarray  # (n_interactions, n)


def _pol_vectors(k, horizontal):
    if horizontal:
        v = np.stack([-k[:, 1], k[:, 0], np.zeros(len(k))], axis=1)
    else:
        v = np.stack([-k[:, 2] * k[:, 0], -k[:, 2] * k[:, 1], 1.0 - k[:, 2] * k[:, 2]], axis=1)
    n = np.sqrt(_dot(v, v))
    bad = n < 1e-12
    if bad.any():
        kb = k[bad]
        v[bad] = np.stack([1.0 - kb[:, 0] * kb[:, 0], -kb[:, 0] * kb[:, 1],
                           -kb[:, 0] * kb[:, 2]], axis=1)
        n[bad] = np.sqrt(_dot(v[bad], v[bad]))
    return v / n[:, None]


def _reflect_pol(e, ki, kr, n, gte, gtm):
    s = np.cross(ki, n)
    sn = np.sqrt(_dot(s, s))
    normal = sn < 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        s = s / sn[:, None]
    pi = np.cross(s, ki)
    pr = np.cross(s, kr)
    a = gte * _dot(e, s)
    b = gtm * _dot(e, pi)
    out = a[:, None] * s + b[:, None] * pr
    if normal.any():
        out[normal] = gte[normal, None] * e[normal]
    return out


def _in_face(tables, f, p):
    inside = np.zeros(len(p), dtype=bool)
    for j in range(tables.face_ntri[f]):
        v0, e1, e2 = tables.face_tri[f, j]
        w = p - v0
        d00 = _dot(e1, e1)
        d01 = _dot(e1, e2)
        d11 = _dot(e2, e2)
        d20 = _dot(w, e1)
        d21 = _dot(w, e2)
        den = d00 * d11 - d01 * d01
        v = (d11 * d20 - d01 * d21) / den
        u = (d00 * d21 - d01 * d20) / den
        inside |= (v >= -FACE_TOL) & (u >= -FACE_TOL) & (v + u <= 1.0 + FACE_TOL)
    return inside


def _tx_amp(src, k):
    return antenna.tx_directional_amplitude(k, src.antenna, src.orientation)


def _np_los(tables, src, pts, eps):
    d = pts - src.position
    ln = np.sqrt(_dot(d, d))
    cells = np.nonzero(ln > 0)[0]
    if cells.size:
        blocked = tables.scene.accel.blocked(np.broadcast_to(src.position, (cells.size, 3)),
                                             pts[cells], eps)
        cells = cells[~blocked]
    ln = ln[cells]
    k = d[cells] / ln[:, None]
    amp = _tx_amp(src, k) * (tables.lam / (4.0 * np.pi * ln)) * np.exp(-1j * tables.k * ln)
    empty = np.zeros((0, cells.size, 3))
    return PathBatch("los", (), cells, np.asarray(amp, dtype=np.complex128).reshape(-1), ln,
                     empty, np.zeros((0, cells.size)))


def _np_reflection(tables, src, tree, s, pts, eps):
    nb = int(tree.lengths[s])
    seq = tree.faces[s, :nb]
    cells = np.arange(len(pts))
    cur = pts
    legs = [None] * nb
    for lvl in range(nb - 1, -1, -1):
        f = seq[lvl]
        n = tables.face_n[f]
        dc = _dot(cur, n) - tables.face_d[f]
        keep = dc > FRONT_TOL
        cells, cur, dc = cells[keep], cur[keep], dc[keep]
        legs = [None if x is None else x[keep] for x in legs]
        img = tree.images[s, lvl]
        di = _dot(img, n) - tables.face_d[f]
        t = dc / (dc - di)
        p = cur + t[:, None] * (img - cur)
        inside = _in_face(tables, f, p)
        cells, p = cells[inside], p[inside]
        legs = [None if x is None else x[inside] for x in legs]
        legs[lvl] = p
        cur = p
        if cells.size == 0:
            break
    if cells.size == 0:
        return None
    m = cells.size
    chain = [np.broadcast_to(src.position, (m, 3))] + legs + [pts[cells]]
    starts = np.concatenate(chain[:-1])
    ends = np.concatenate(chain[1:])
    blocked = tables.scene.accel.blocked(starts, ends, eps).reshape(nb + 1, m).any(axis=0)
    keep = ~blocked
    if not keep.any():
        return None
    cells = cells[keep]
    chain = [c[keep] for c in chain]
    rx = chain[-1]
    last = tree.images[s, nb - 1]
    diff = rx - last
    length = np.sqrt(_dot(diff, diff))
    ki = _unit(chain[1] - chain[0])
    g = _tx_amp(src, ki)
    horizontal = src.antenna.polarization == "horizontal"
    e = _pol_vectors(ki, horizontal).astype(np.complex128)
    coss = []
    for lvl in range(nb):
        f = seq[lvl]
        kr = _unit(chain[lvl + 2] - chain[lvl + 1])
        n = tables.face_n[f]
        cos_i = np.minimum(1.0, np.abs(_dot(ki, n)))
        gte, gtm = em.fresnel_coeffs(np.full(cos_i.shape, tables.face_eta[f]), cos_i)
        e = _reflect_pol(e, ki, kr, n, gte, gtm)
        coss.append(cos_i)
        ki = kr
    proj = _dot(e, _pol_vectors(ki, horizontal))
    amp = g * (tables.lam / (4.0 * np.pi * length)) * np.exp(-1j * tables.k * length) * proj
    return PathBatch("reflection", tuple(int(f) for f in seq), cells,
                     np.asarray(amp, dtype=np.complex128).reshape(-1), length,
                     np.stack(chain[1:-1]), np.stack(coss))


def _wedge_angles(v, n0, t0):
    a = np.arctan2(_dot(v, n0), _dot(v, t0))
    return np.where(a < 0.0, a + 2.0 * np.pi, a)


def _np_diffraction(tables, src, e, pts, eps, model):
    o, d = tables.e_o[e], tables.e_d[e]
    tx = src.position
    wt = tx - o
    at = float(_dot(wt, d))
    rho_t = float(np.sqrt(_dot(wt - at * d, wt - at * d)))
    wr = pts - o
    ar = _dot(wr, d)
    pr = wr - ar[:, None] * d
    rho_r = np.sqrt(_dot(pr, pr))
    den = rho_t + rho_r
    cells = np.nonzero(den > 0)[0]
    ar, den = ar[cells], den[cells]
    t = at + (ar - at) * rho_t / den
    ok = (t > EDGE_TOL) & (t < tables.e_len[e] - EDGE_TOL)
    cells, t = cells[ok], t[ok]
    q = o + t[:, None] * d
    rx = pts[cells]
    nw = tables.e_nw[e]
    phi_p = _wedge_angles(tx - q, tables.e_n0[e], tables.e_t0[e])
    phi = _wedge_angles(rx - q, tables.e_n0[e], tables.e_t0[e])
    ok = (phi_p > 0) & (phi_p < nw * np.pi) & (phi > 0) & (phi < nw * np.pi)
    cells, q, rx, phi_p, phi = cells[ok], q[ok], rx[ok], phi_p[ok], phi[ok]
    if cells.size == 0:
        return None
    m = cells.size
    txb = np.broadcast_to(tx, (m, 3))
    blocked = tables.scene.accel.blocked(np.concatenate([txb, q]), np.concatenate([q, rx]), eps)
    keep = ~blocked.reshape(2, m).any(axis=0)
    cells, q, rx, phi_p, phi, txb = cells[keep], q[keep], rx[keep], phi_p[keep], phi[keep], txb[keep]
    si = q - txb
    s_in = np.sqrt(_dot(si, si))
    si = si / s_in[:, None]
    so = rx - q
    s_out = np.sqrt(_dot(so, so))
    so = so / s_out[:, None]
    cb = _dot(si, d)
    sin_b0 = np.sqrt(np.maximum(0.0, 1.0 - cb * cb))
    ok = sin_b0 >= 1e-12
    cells, q, rx, phi_p, phi, txb = cells[ok], q[ok], rx[ok], phi_p[ok], phi[ok], txb[ok]
    si, so, s_in, s_out, sin_b0 = si[ok], so[ok], s_in[ok], s_out[ok], sin_b0[ok]
    if cells.size == 0:
        return None
    g = _tx_amp(src, si)
    k = tables.k
    horizontal = src.antenna.polarization == "horizontal"
    if model == "utd":
        dist = s_in * s_out * sin_b0 * sin_b0 / (s_in + s_out)
        dcoef = em.utd_coefficient(nw, phi, phi_p, sin_b0, dist, k)
        ei = _pol_vectors(si, horizontal)
        fp = _unit(-np.cross(d, si))
        bp = np.cross(fp, si)
        fo = _unit(np.cross(d, so))
        bo = np.cross(fo, so)
        pr = _pol_vectors(so, horizontal)
        proj = -(_dot(ei, bp) * _dot(bo, pr) + _dot(ei, fp) * _dot(fo, pr))
    else:
        dv = rx - txb
        direct = np.sqrt(_dot(dv, dv))
        u = dv / direct[:, None]
        w = q - txb
        perp = w - _dot(w, u)[:, None] * u
        clearance = np.sqrt(_dot(perp, perp))
        dcoef = em.knife_edge_coefficient(phi, phi_p, s_in, s_out, direct, clearance, k)
        proj = 1.0
    e_in = g * tables.lam / (4.0 * np.pi * s_in) * np.exp(-1j * k * s_in)
    spread = np.sqrt(s_in / (s_out * (s_in + s_out)))
    amp = e_in * dcoef * spread * np.exp(-1j * k * s_out) * proj
    cos_d = np.abs(cb[ok])
    return PathBatch("diffraction", (int(e),), cells, np.asarray(amp, np.complex128).reshape(-1),
                     s_in + s_out, q[None], cos_d[None])


def iter_batches(tables, src, pts, cfg, los=True, reflections=True, diffraction=True):
    """Yield PathBatch per contribution, in dedup-key order."""
    eps = cfg.occlusion_epsilon
    if los:
        yield _np_los(tables, src, pts, eps)
    if reflections and cfg.max_reflection_order > 0:
        tree = tables.image_tree(src.position, cfg.max_reflection_order)
        for s in range(len(tree)):
            b = _np_reflection(tables, src, tree, s, pts, eps)
            if b is not None:
                yield b
    if diffraction and cfg.diffraction_enabled:
        for e in range(tables.e_len.shape[0]):
            b = _np_diffraction(tables, src, e, pts, eps, cfg.diffraction_model)
            if b is not None:
                yield b


@dataclass
class SweepResult:
    """Per-point coherent field sum, incoherent power sum and path bookkeeping."""

    coherent: np.ndarray
    incoherent: np.ndarray
    n_paths: np.ndarray
    truncated: np.ndarray
    backend: str = field(default="numpy")

    def gain(self, combining="coherent"):
        if combining == "coherent":
            return np.abs(self.coherent) ** 2
        if combining == "incoherent":
            return self.incoherent.copy()
        raise ValueError(f"unknown combining mode {combining!r}")


def _sweep_numpy_chunk(tables, src, pts, cfg):
    m = len(pts)
    coh = np.zeros(m, dtype=np.complex128)
    inc = np.zeros(m)
    cnt = np.zeros(m, dtype=np.int64)
    trunc = np.zeros(m, dtype=bool)
    floor = cfg.floor_linear
    for b in iter_batches(tables, src, pts, cfg):
        a = b.amplitude
        p = a.real * a.real + a.imag * a.imag
        keep = p >= floor
        cells, a, p = b.cells[keep], a[keep], p[keep]
        full = cnt[cells] >= cfg.max_paths_per_link
        trunc[cells[full]] = True
        cells, a, p = cells[~full], a[~full], p[~full]
        coh[cells] += a
        inc[cells] += p
        cnt[cells] += 1
    return coh, inc, cnt, trunc


def _ant_params(cfg):
    return np.array([cfg.element_gain_max, cfg.theta_3db, cfg.phi_3db, cfg.sla_v, cfg.a_max,
                     cfg.rows, cfg.cols, cfg.spacing, 1.0 if cfg.pattern == "isotropic" else 0.0])


def _sweep_numba(tables, src, pts, cfg):
    from ._kernels import nb_sweep

    tree = tables.image_tree(src.position, cfg.max_reflection_order)
    accel = tables.scene.accel
    return nb_sweep.sweep(
        np.ascontiguousarray(pts, dtype=np.float64), np.ascontiguousarray(src.position),
        antenna.orientation_frame(src.orientation), _ant_params(src.antenna),
        src.antenna.polarization == "horizontal", tables.k, tables.lam,
        tables.face_n, tables.face_d, tables.face_tri, tables.face_ntri, tables.face_eta,
        tree.faces, tree.lengths, tree.images,
        tables.e_o, tables.e_d, tables.e_len, tables.e_n0, tables.e_t0, tables.e_nw,
        bool(cfg.diffraction_enabled), 0 if cfg.diffraction_model == "utd" else 1,
        *accel.kernel_args(),
        float(cfg.occlusion_epsilon), float(cfg.floor_linear), int(cfg.max_paths_per_link))


def sweep_points(tx, points, scene, cfg=None, carrier_hz=None, threads=None, backend=None):
    """Sum all paths from ``tx`` to each receiver point.

    ``backend`` overrides the process-wide choice ("numba" or "numpy").
    """
    cfg = cfg or TracerConfig()
    src = as_source(tx, carrier_hz)
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    tables = SceneTables.for_scene(scene, src.carrier_hz)
    backend = backend or _backend.backend_name()
    if backend == "numba" and not _backend.HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    if backend == "numba":
        with _backend.thread_limit(threads):
            coh, inc, cnt, trunc = _sweep_numba(tables, src, pts, cfg)
        return SweepResult(coh, inc, cnt, trunc, "numba")
    tables.image_tree(src.position, cfg.max_reflection_order)  # build once, outside workers
    chunks = [(b, min(len(pts), b + _CHUNK)) for b in range(0, len(pts), _CHUNK)]
    workers = _backend.resolve_threads(threads) if threads is not None else 1
    run = lambda be: _sweep_numpy_chunk(tables, src, pts[be[0]:be[1]], cfg)  # noqa: E731
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    if not parts:
        parts = [_sweep_numpy_chunk(tables, src, pts, cfg)]
    coh, inc, cnt, trunc = (np.concatenate(x) for x in zip(*parts))
    return SweepResult(coh, inc, cnt, trunc, "numpy")


# -- per-link API ------------------------------------------------------------

def _link_paths(tx, rx_pos, scene, cfg, carrier_hz, **which):
    src = as_source(tx, carrier_hz)
    rx = np.asarray(rx_pos, dtype=np.float64)
    if np.array_equal(rx, src.position):
        raise ValueError("transmitter and receiver positions coincide")
    tables = SceneTables.for_scene(scene, src.carrier_hz)
    paths = []
    truncated = 0
    floor = cfg.floor_linear
    for b in iter_batches(tables, src, rx[None], cfg, **which):
        if b.cells.size == 0:
            continue
        a = complex(b.amplitude[0])
        if abs(a) ** 2 < floor:
            continue
        if len(paths) >= cfg.max_paths_per_link:
            truncated += 1
            continue
        kind = "reflection" if b.kind == "reflection" else "diffraction"
        inter = tuple(Interaction(kind, b.points[i, 0].copy(), int(b.index[i]), float(b.cos[i, 0]))
                      for i in range(b.points.shape[0]))
        paths.append(PropagationPath(src.index, inter, float(b.length[0]), a))
    if truncated:
        warnings.warn(f"link truncated at {cfg.max_paths_per_link} paths "
                      f"({truncated} valid paths dropped)", PathTruncationWarning, stacklevel=3)
    return paths


def trace_los(tx, rx_pos, scene, cfg=None, carrier_hz=None):
    paths = _link_paths(tx, rx_pos, scene, cfg or TracerConfig(), carrier_hz,
                        los=True, reflections=False, diffraction=False)
    return paths[0] if paths else None


def trace_reflections(tx, rx_pos, scene, cfg=None, carrier_hz=None):
    return _link_paths(tx, rx_pos, scene, cfg or TracerConfig(), carrier_hz,
                       los=False, reflections=True, diffraction=False)


def trace_diffraction(tx, rx_pos, scene, cfg=None, carrier_hz=None):
    cfg = cfg or TracerConfig()
    if not cfg.diffraction_enabled:
        raise ValueError("trace_diffraction requires diffraction_enabled")
    return _link_paths(tx, rx_pos, scene, cfg, carrier_hz,
                       los=False, reflections=False, diffraction=True)


def trace_all(tx, rx_pos, scene, cfg=None, carrier_hz=None):
    return _link_paths(tx, rx_pos, scene, cfg or TracerConfig(), carrier_hz)


def path_gain(paths, combining="coherent"):
    """Linear power gain of a set of paths."""
    if combining == "coherent":
        total = sum((p.amplitude for p in paths), 0j)
        return abs(total) ** 2
    if combining == "incoherent":
        return float(sum(abs(p.amplitude) ** 2 for p in paths))
    raise ValueError(f"unknown combining mode {combining!r}")
