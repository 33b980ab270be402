import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as o
from raytwin import geometry, scenes
from raytwin.geometry import Ray, SceneFormatError, SceneValidationError, TriangleMesh

finite = st.floats(-50, 50, allow_nan=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


def roof_mesh(nx=5, ny=2, z=12.0):
    xs, ys = np.linspace(0, 10, nx + 1), np.linspace(0, 4, ny + 1)
    v = np.array([[x, y, z] for y in ys for x in xs])
    tris = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            tris += [[a, b, c], [a, c, d]]
    return TriangleMesh(v, np.array(tris), "roof", "concrete")


def test_single_quad_scene():
    doc = geometry.scene_document([scenes.ground_mesh(0, 0, 1, 1, material="concrete")])
    s = geometry.load_scene(json.dumps(doc))
    assert s.n_triangles == 2 and len(s.faces) == 1


def test_unknown_material_rejected():
    doc = geometry.scene_document([scenes.ground_mesh(0, 0, 1, 1, material="unobtanium")])
    with pytest.raises(SceneValidationError, match="unobtanium"):
        geometry.load_scene(doc)


def test_degenerate_triangle_names_object():
    with pytest.raises(SceneValidationError, match="sliver"):
        TriangleMesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0.0]]), np.array([[0, 1, 2]]),
                     "sliver", "concrete")


def test_malformed_document_reports_location():
    with pytest.raises(SceneFormatError, match="line"):
        geometry.load_scene('{"version": 1,\n "units": "m",\n "objects": [}')
    with pytest.raises(SceneFormatError, match=r"objects\[0\]"):
        geometry.load_scene({"version": 1, "units": "m",
                             "objects": [{"id": "a", "material": "concrete", "vertices": [],
                                          "triangles": [], "colour": 1}]})
    with pytest.raises(SceneFormatError, match="unknown"):
        geometry.load_scene({"version": 1, "units": "m", "objects": [], "extra": 0})


def test_box_faces_match_grouping_oracle(box_scene):
    m = box_scene.meshes[0]
    assert len(box_scene.faces) == 6 == o.coplanar_groups(m.vertices, m.triangles)


def test_tessellated_roof_is_one_face():
    m = roof_mesh()
    assert len(m.triangles) == 20
    faces = geometry.extract_planar_faces(m)
    assert len(faces) == 1 == o.coplanar_groups(m.vertices, m.triangles)
    assert sorted(faces[0].source_triangles) == list(range(20))


def test_two_perpendicular_triangles():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
    m = TriangleMesh(v, np.array([[0, 1, 2], [0, 3, 1]]), "l", "concrete")
    assert len(geometry.extract_planar_faces(m)) == 2


def test_face_partition_and_normals(manhattan):
    counts = sum(len(f.source_triangles) for f in manhattan.faces)
    assert counts == manhattan.n_triangles
    for f in manhattan.faces:
        assert abs(np.linalg.norm(f.unit_normal) - 1.0) < 1e-9
        assert np.all(np.abs(f.polygon @ f.unit_normal - f.plane_offset) < 1e-6)


def test_bounds_contain_vertices(manhattan):
    lo, hi = manhattan.bounds
    for m in manhattan.meshes:
        assert np.all(m.vertices >= lo) and np.all(m.vertices <= hi)


def test_intersect_simple():
    s = geometry.build_scene([scenes.ground_mesh(-10, -10, 10, 10, z=5.0)])
    h = geometry.intersect(Ray(np.zeros(3), np.array([0, 0, 1.0])), s)
    assert h.t == pytest.approx(5.0) and np.allclose(h.point, [0, 0, 5])
    assert h.cos_incidence == pytest.approx(1.0)
    assert geometry.intersect(Ray(np.zeros(3), np.array([0, 0, -1.0])), s) is None


def test_ray_validation():
    with pytest.raises(ValueError):
        Ray(np.zeros(3), np.array([0, 0, 2.0]))
    with pytest.raises(ValueError):
        Ray(np.zeros(3), np.array([0, 0, 1.0]), t_min=2.0, t_max=1.0)


@pytest.mark.parametrize("scene_name", ["box", "manhattan"])
def test_accel_matches_exhaustive_10k_rays(scene_name, box_scene, manhattan):
    scene = box_scene if scene_name == "box" else manhattan
    tris, _ = o.scene_triangles(scene)
    rng = np.random.default_rng(7)
    lo, hi = scene.bounds
    O = rng.uniform(lo - 5, hi + 5, size=(10_000, 3))
    D = rng.normal(size=(10_000, 3))
    D /= np.linalg.norm(D, axis=1)[:, None]
    t, tri = scene.accel.nearest(O, D, 0.0, np.inf)
    ref_t, ref_f = o.nearest_hits(O, D, tris)
    hit = ref_f >= 0
    assert np.array_equal(tri >= 0, hit)
    assert np.all(np.abs(t[hit] - ref_t[hit]) <= 1e-9)
    tf = np.asarray(scene.tri_face)
    assert np.array_equal(tf[tri[hit]], tf[ref_f[hit]])


def test_box_ray_entering_known_face(box_scene):
    tris, _ = o.scene_triangles(box_scene)
    o_, d = np.array([-5.0, 3.0, 4.0]), np.array([1.0, 0.2, 0.1])
    d /= np.linalg.norm(d)
    h = geometry.intersect(Ray(o_, d), box_scene)
    t_ref, _ = o.nearest_hit(o_, d, tris)
    assert abs(h.t - t_ref) <= 1e-9
    assert np.allclose(box_scene.faces[h.face_index].unit_normal, [-1, 0, 0])


def test_occlusion_cases(box_scene, empty_scene):
    assert not geometry.occluded([0, 0, 0], [5, 5, 5], empty_scene)
    assert geometry.occluded([-5, 5, 5], [15, 5, 5], box_scene)
    with pytest.raises(ValueError):
        geometry.occluded([1, 1, 1], [1, 1, 1], box_scene)


@pytest.mark.parametrize("offset", [-1e-3, 1e-3])
def test_occlusion_grazing_edge_matches_oracle(box_scene, offset):
    tris, _ = o.scene_triangles(box_scene)
    rng = np.random.default_rng(3)
    for _ in range(50):
        z = 10.0 + offset
        p = np.array([-5.0, rng.uniform(1, 9), z])
        q = np.array([15.0, rng.uniform(1, 9), z])
        ref = o.seg_tri_hits(p[None], q[None], tris, 1e-4)[0]
        assert geometry.occluded(p, q, box_scene) == ref == (offset < 0)


@given(vec3, vec3)
def test_occlusion_symmetric(p, q):
    from hypothesis import assume

    assume(np.linalg.norm(p - q) > 1e-3)
    s = _box()
    assert geometry.occluded(p, q, s) == geometry.occluded(q, p, s)


_BOX = []


def _box():
    if not _BOX:
        _BOX.append(geometry.build_scene([scenes.box_mesh(-5, -5, 5, 5, 10, "b", bottom=True)]))
    return _BOX[0]


def test_mirror_examples():
    ground = geometry.build_scene([scenes.ground_mesh(-1, -1, 1, 1)]).faces[0]
    assert np.allclose(geometry.mirror_point([0, 0, 3], ground), [0, 0, -3])
    assert np.allclose(geometry.mirror_point([0.3, 0.2, 0], ground), [0.3, 0.2, 0])
    wall = geometry.build_scene([scenes.quad((5, 0, 0), (5, 1, 0), (5, 1, 1), (5, 0, 1),
                                             "w", "concrete")]).faces[0]
    assert np.allclose(geometry.mirror_point([1, 2, 3], wall), [9, 2, 3], atol=1e-12)


@given(vec3)
def test_mirror_involution(p):
    for f in _box().faces:
        assert np.allclose(geometry.mirror_point(geometry.mirror_point(p, f), f), p, atol=1e-9)


def test_manhattan_edges_convex_only(manhattan):
    assert len(manhattan.faces) == 46
    for e in manhattan.edges:
        assert np.pi < e.exterior_angle <= 2 * np.pi
        assert abs(np.linalg.norm(e.direction) - 1) < 1e-12


def test_scene_document_round_trip(manhattan):
    doc = geometry.scene_document(manhattan.meshes)
    s = geometry.load_scene(json.dumps(doc))
    assert len(s.faces) == len(manhattan.faces) and len(s.edges) == len(manhattan.edges)
