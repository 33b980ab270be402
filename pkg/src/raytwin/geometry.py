"""Scene representation, planar reflectors, diffraction edges and ray queries.

All coordinates are metres in a local right-handed frame with +z up.
Faces reflect on the side their normal points to, so meshes are expected to
be wound with outward normals (counter-clockwise seen from outside).
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import em
from .bvh import build_bvh

AREA_MIN = 1e-9
NORMAL_TOLERANCE = 1e-3
COPLANAR_TOLERANCE = 1e-6
OCCLUSION_EPSILON = 1e-4
_WELD = 1e-7  # vertex welding quantum for topology


class SceneError(ValueError):
    """Base class for scene loading problems."""


class SceneFormatError(SceneError):
    pass


class SceneValidationError(SceneError):
    pass


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64)
        d = np.asarray(self.direction, dtype=np.float64)
        if o.shape != (3,) or d.shape != (3,) or not (np.all(np.isfinite(o)) and np.all(np.isfinite(d))):
            raise ValueError("ray origin and direction must be finite 3-vectors")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        if not 0.0 <= self.t_min < self.t_max:
            raise ValueError("ray interval must satisfy 0 <= t_min < t_max")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class Hit:
    t: float
    point: np.ndarray
    face_index: int
    cos_incidence: float
    triangle_index: int


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    object_id: str
    material_name: str

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        t = np.asarray(self.triangles)
        where = f"object {self.object_id!r}"
        if v.ndim != 2 or v.shape[1] != 3:
            raise SceneValidationError(f"{where}: vertices must be an (N, 3) array")
        if not np.all(np.isfinite(v)):
            raise SceneValidationError(f"{where}: vertices must be finite")
        if t.size == 0:
            t = np.zeros((0, 3), dtype=np.int64)
        if t.ndim != 2 or t.shape[1] != 3 or not np.issubdtype(t.dtype, np.integer):
            raise SceneValidationError(f"{where}: triangles must be an (M, 3) integer array")
        t = t.astype(np.int64)
        if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
            bad = int(np.nonzero((t < 0).any(axis=1) | (t >= v.shape[0]).any(axis=1))[0][0])
            raise SceneValidationError(f"{where}: triangles[{bad}] has a vertex index out of range")
        area = triangle_areas(v, t)
        if np.any(area <= AREA_MIN):
            bad = int(np.nonzero(area <= AREA_MIN)[0][0])
            raise SceneValidationError(f"{where}: triangles[{bad}] is degenerate (area {area[bad]:.3e} m^2)")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)


@dataclass(frozen=True)
class PlanarFace:
    polygon: np.ndarray
    unit_normal: np.ndarray
    plane_offset: float
    material_name: str
    source_triangles: tuple
    object_id: str = ""

    def signed_distance(self, p):
        return np.asarray(p, dtype=np.float64) @ self.unit_normal - self.plane_offset


@dataclass(frozen=True)
class DiffractionEdge:
    origin: np.ndarray
    direction: np.ndarray
    length: float
    faces: tuple
    normal0: np.ndarray
    normal1: np.ndarray
    tangent0: np.ndarray
    exterior_angle: float

    @property
    def wedge(self):
        return em.WedgeGeometry(self.origin, self.direction, self.normal0, self.normal1,
                                self.tangent0, self.exterior_angle)


@dataclass(frozen=True, eq=False)
class Scene:
    meshes: tuple
    faces: tuple
    materials: dict
    accel: object
    bounds: object  # (2, 3) array or None for an empty scene
    edges: tuple = ()
    tri_face: np.ndarray = field(default=None, repr=False)
    face_normals: np.ndarray = field(default=None, repr=False)
    face_offsets: np.ndarray = field(default=None, repr=False)

    @property
    def n_triangles(self):
        return int(self.tri_face.shape[0])

    def intersect(self, ray):
        return intersect(ray, self)

    def occluded(self, p, q, epsilon=OCCLUSION_EPSILON):
        return occluded(p, q, self, epsilon)


def triangle_areas(v, t):
    if t.shape[0] == 0:
        return np.zeros(0)
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _weld_keys(vertices):
    q = np.round(np.asarray(vertices) / _WELD).astype(np.int64)
    _, inverse = np.unique(q, axis=0, return_inverse=True)
    return inverse.reshape(-1)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def _mesh_edges(keys, tris):
    """Undirected welded edge -> list of (triangle, local corner opposite the edge)."""
    edges = defaultdict(list)
    for ti, tri in enumerate(tris):
        for c in range(3):
            a, b = keys[tri[(c + 1) % 3]], keys[tri[(c + 2) % 3]]
            edges[(min(a, b), max(a, b))].append((ti, c))
    return edges


def extract_planar_faces(mesh, normal_tolerance=NORMAL_TOLERANCE,
                         coplanar_tolerance=COPLANAR_TOLERANCE, triangle_offset=0):
    """Group edge-adjacent, coplanar, equally oriented triangles into faces.

    ``source_triangles`` are reported offset by ``triangle_offset`` so a scene
    can index its global triangle arrays.
    """
    v, t = mesh.vertices, mesh.triangles
    if t.shape[0] == 0:
        return []
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    nrm = np.cross(b - a, c - a)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    off = np.einsum("ij,ij->i", nrm, a)
    keys = _weld_keys(v)
    uf = _UnionFind(t.shape[0])
    cos_tol = math.cos(normal_tolerance)
    for (_, _), users in _mesh_edges(keys, t).items():
        for i in range(len(users)):
            for j in range(i + 1, len(users)):
                p, q = users[i][0], users[j][0]
                if float(nrm[p] @ nrm[q]) < cos_tol:
                    continue
                dp = np.abs(v[t[q]] @ nrm[p] - off[p]).max()
                dq = np.abs(v[t[p]] @ nrm[q] - off[q]).max()
                if max(dp, dq) <= coplanar_tolerance:
                    uf.union(p, q)
    groups = defaultdict(list)
    for i in range(t.shape[0]):
        groups[uf.find(i)].append(i)
    areas = triangle_areas(v, t)
    faces = []
    for root in sorted(groups):
        members = groups[root]
        n = (nrm[members] * areas[members, None]).sum(axis=0)
        n /= np.linalg.norm(n)
        verts = np.unique(t[members].reshape(-1))
        offset = float(np.mean(v[verts] @ n))
        polygon = _boundary_loop(v, t, members, keys, n)
        faces.append(PlanarFace(polygon, n, offset, mesh.material_name,
                                tuple(int(m) + triangle_offset for m in members), mesh.object_id))
    return faces


def _boundary_loop(v, t, members, keys, normal):
    directed = {}
    for ti in members:
        tri = t[ti]
        for c in range(3):
            ia, ib = tri[c], tri[(c + 1) % 3]
            directed[(keys[ia], keys[ib])] = (ia, ib)
    boundary = {ka: (kb, ia) for (ka, kb), (ia, ib) in directed.items() if (kb, ka) not in directed}
    loops = []
    remaining = dict(boundary)
    while remaining:
        k0 = min(remaining)
        loop = []
        k = k0
        while k in remaining:
            nxt, ia = remaining.pop(k)
            loop.append(v[ia])
            k = nxt
        loops.append(np.array(loop))
    if not loops:
        return np.zeros((0, 3))

    def area(poly):
        s = np.zeros(3)
        for i in range(len(poly)):
            s += np.cross(poly[i], poly[(i + 1) % len(poly)])
        return 0.5 * float(s @ normal)

    best = max(loops, key=lambda p: abs(area(p)))
    return best if area(best) >= 0 else best[::-1].copy()


def _point_on_faces(p, faces, tri_v, skip_object, tol=COPLANAR_TOLERANCE):
    for f in faces:
        if f.object_id == skip_object:
            continue
        if abs(float(p @ f.unit_normal) - f.plane_offset) > tol:
            continue
        for ti in f.source_triangles:
            a, b, c = tri_v[ti]
            if _in_triangle(p, a, b, c, f.unit_normal):
                return True
    return False


def _in_triangle(p, a, b, c, n, tol=1e-9):
    for u, w in ((a, b), (b, c), (c, a)):
        if float(np.cross(w - u, p - u) @ n) < -tol:
            return False
    return True


def extract_diffraction_edges(meshes, faces, tri_face, tri_v):
    """Convex edges shared by two faces of the same mesh.

    Collinear pieces between the same face pair are merged into one edge;
    edges lying on another object's surface are dropped.
    """
    pieces = defaultdict(list)
    base = 0
    for mesh in meshes:
        keys = _weld_keys(mesh.vertices)
        for (_, _), users in _mesh_edges(keys, mesh.triangles).items():
            if len(users) != 2:
                continue
            (p, cp), (q, cq) = users
            fp, fq = int(tri_face[base + p]), int(tri_face[base + q])
            if fp == fq:
                continue
            tri = mesh.triangles[p]
            a = mesh.vertices[tri[(cp + 1) % 3]]
            b = mesh.vertices[tri[(cp + 2) % 3]]
            pieces[(min(fp, fq), max(fp, fq))].append((a, b, base + p, base + q))
        base += mesh.triangles.shape[0]

    edges = []
    for (f0, f1) in sorted(pieces):
        segs = pieces[(f0, f1)]
        a0, b0, _, _ = segs[0]
        e = (b0 - a0) / np.linalg.norm(b0 - a0)
        tri0 = None
        tri1 = None
        intervals = []
        for a, b, p, q in segs:
            if tri_face[p] == f0:
                tp, tq = p, q
            else:
                tp, tq = q, p
            tri0 = tp if tri0 is None else tri0
            tri1 = tq if tri1 is None else tri1
            sa, sb = float((a - a0) @ e), float((b - a0) @ e)
            intervals.append((min(sa, sb), max(sa, sb)))
        n0 = faces[f0].unit_normal
        n1 = faces[f1].unit_normal
        t0 = _inward_tangent(tri_v[tri0], a0, e)
        t1 = _inward_tangent(tri_v[tri1], a0, e)
        if not (float(t1 @ n0) < -1e-9 and float(t0 @ n1) < -1e-9):
            continue  # concave or flat
        interior = math.acos(max(-1.0, min(1.0, float(t0 @ t1))))
        exterior = 2.0 * math.pi - interior
        intervals.sort()
        merged = [list(intervals[0])]
        for lo, hi in intervals[1:]:
            if lo <= merged[-1][1] + 1e-9:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        for lo, hi in merged:
            origin = a0 + lo * e
            length = hi - lo
            mid = origin + 0.5 * length * e
            owner = faces[f0].object_id
            if _point_on_faces(mid, faces, tri_v, owner):
                continue
            edges.append(DiffractionEdge(origin, e.copy(), float(length), (f0, f1), n0, n1, t0,
                                         exterior))
    return edges


def _inward_tangent(tri, a0, e):
    # direction in the triangle's plane, perpendicular to the edge, into the triangle
    cen = tri.mean(axis=0)
    w = cen - a0
    w = w - (w @ e) * e
    return w / np.linalg.norm(w)


def build_scene(meshes, materials=None, normal_tolerance=NORMAL_TOLERANCE):
    """Validate meshes, resolve materials, extract faces/edges and build the BVH."""
    table = em.load_default_materials()
    if materials:
        table.update(materials)
    meshes = tuple(meshes)
    ids = set()
    for m in meshes:
        if m.object_id in ids:
            raise SceneValidationError(f"duplicate object id {m.object_id!r}")
        ids.add(m.object_id)
        if m.material_name not in table:
            raise SceneValidationError(
                f"object {m.object_id!r}: unknown material {m.material_name!r}")

    faces = []
    tri_face = []
    tri_v = []
    base = 0
    for m in meshes:
        mf = extract_planar_faces(m, normal_tolerance, triangle_offset=base)
        local = np.empty(m.triangles.shape[0], dtype=np.int64)
        for f in mf:
            for ti in f.source_triangles:
                local[ti - base] = len(faces)
            faces.append(f)
        tri_face.append(local)
        tri_v.append(m.vertices[m.triangles])
        base += m.triangles.shape[0]
    tri_face = np.concatenate(tri_face) if tri_face else np.zeros(0, dtype=np.int64)
    tri_v = np.concatenate(tri_v) if tri_v else np.zeros((0, 3, 3))
    accel = build_bvh(tri_v[:, 0], tri_v[:, 1], tri_v[:, 2], tri_face)
    edges = extract_diffraction_edges(meshes, faces, tri_face, tri_v)
    if meshes:
        allv = np.concatenate([m.vertices for m in meshes])
        bounds = np.stack([allv.min(axis=0), allv.max(axis=0)])
    else:
        bounds = None
    fn = np.array([f.unit_normal for f in faces]).reshape(-1, 3)
    fo = np.array([f.plane_offset for f in faces], dtype=np.float64)
    return Scene(meshes, tuple(faces), table, accel, bounds, tuple(edges), tri_face, fn, fo)


_TOP_KEYS = {"version", "units", "materials", "objects"}
_OBJ_KEYS = {"id", "material", "vertices", "triangles"}
_MAT_KEYS = {"a", "b", "c", "d"}


def load_scene(document):
    """Parse a scene document (YAML/JSON text or an already-parsed mapping)."""
    if isinstance(document, (str, bytes)):
        try:
            doc = yaml.safe_load(document)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
            raise SceneFormatError(f"{where}{getattr(exc, 'problem', exc)}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise SceneFormatError("scene document must be a mapping")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SceneFormatError(f"unknown top-level key(s): {', '.join(sorted(map(str, unknown)))}")
    for key in ("version", "units", "objects"):
        if key not in doc:
            raise SceneFormatError(f"missing required key {key!r}")
    if doc["version"] != 1:
        raise SceneFormatError(f"version: unsupported scene version {doc['version']!r}")
    if doc["units"] != "m":
        raise SceneFormatError(f"units: only 'm' is supported, got {doc['units']!r}")

    materials = {}
    mats = doc.get("materials") or {}
    if not isinstance(mats, dict):
        raise SceneFormatError("materials: must be a mapping of name -> {a, b, c, d}")
    for name, p in mats.items():
        path = f"materials.{name}"
        if not isinstance(p, dict):
            raise SceneFormatError(f"{path}: must be a mapping")
        if set(p) != _MAT_KEYS:
            raise SceneFormatError(f"{path}: expected keys a, b, c, d, got {sorted(map(str, p))}")
        try:
            materials[str(name)] = em.MaterialParams(str(name), *(float(p[k]) for k in "abcd"))
        except (TypeError, ValueError) as exc:
            raise SceneValidationError(f"{path}: {exc}") from exc

    objs = doc["objects"]
    if not isinstance(objs, list):
        raise SceneFormatError("objects: must be a list")
    meshes = []
    for i, o in enumerate(objs):
        path = f"objects[{i}]"
        if not isinstance(o, dict):
            raise SceneFormatError(f"{path}: must be a mapping")
        unknown = set(o) - _OBJ_KEYS
        if unknown:
            raise SceneFormatError(f"{path}: unknown key(s) {', '.join(sorted(map(str, unknown)))}")
        missing = _OBJ_KEYS - set(o)
        if missing:
            raise SceneFormatError(f"{path}: missing key(s) {', '.join(sorted(missing))}")
        try:
            verts = np.array(o["vertices"], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SceneFormatError(f"{path}.vertices: not a numeric [[x, y, z], ...] list") from exc
        tris_raw = o["triangles"]
        if not isinstance(tris_raw, list) or not all(
                isinstance(tr, list) and len(tr) == 3 and all(isinstance(x, int) for x in tr)
                for tr in tris_raw):
            raise SceneFormatError(f"{path}.triangles: must be a list of integer triples")
        tris = np.array(tris_raw, dtype=np.int64).reshape(-1, 3)
        meshes.append(TriangleMesh(verts.reshape(-1, 3) if verts.size else verts.reshape(0, 3),
                                   tris, str(o["id"]), str(o["material"])))
    return build_scene(meshes, materials)


def load_scene_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return load_scene(fh.read())


def scene_document(meshes, materials=None):
    """Serialisable mapping for ``meshes`` in the scene document format."""
    doc = {"version": 1, "units": "m"}
    if materials:
        doc["materials"] = {m.name: {"a": m.a, "b": m.b, "c": m.c, "d": m.d}
                            for m in materials.values()}
    doc["objects"] = [
        {"id": m.object_id, "material": m.material_name,
         "vertices": m.vertices.tolist(), "triangles": m.triangles.tolist()}
        for m in meshes
    ]
    return doc


def mirror_point(p, face):
    p = np.asarray(p, dtype=np.float64)
    return p - 2.0 * (p @ face.unit_normal - face.plane_offset) * face.unit_normal


def intersect(ray, scene):
    """Nearest hit of ``ray`` with the scene, or None."""
    t, tri = scene.accel.nearest(ray.origin[None], ray.direction[None], ray.t_min, ray.t_max)
    if tri[0] < 0:
        return None
    t = float(t[0])
    fi = int(scene.tri_face[tri[0]])
    cos_i = abs(float(ray.direction @ scene.faces[fi].unit_normal))
    return Hit(t, ray.origin + t * ray.direction, fi, cos_i, int(tri[0]))


def occluded(p, q, scene, epsilon=OCCLUSION_EPSILON):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if np.array_equal(p, q):
        raise ValueError("occlusion query needs two distinct points")
    return bool(scene.accel.blocked(p[None], q[None], epsilon)[0])
