import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import street_point
from raytwin import _backend, bvh, radiomap, scenes, tracer
from raytwin._kernels import nb_geom

needs_numba = pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba unavailable")
HERE = os.path.dirname(__file__)


def _env(no_numba):
    env = dict(os.environ)
    env.pop("RAYTWIN_NO_NUMBA", None)
    if no_numba:
        env["RAYTWIN_NO_NUMBA"] = "1"
    return env


@pytest.mark.parametrize("flag, expected", [(False, "numba"), (True, "numpy")])
def test_env_flag_selects_backend(flag, expected):
    if expected == "numba" and not _backend.HAVE_NUMBA:
        pytest.skip("numba unavailable")
    r = subprocess.run([sys.executable, "-c",
                        "from raytwin import _backend; print(_backend.backend_name())"],
                       env=_env(flag), capture_output=True, text=True, check=True)
    assert r.stdout.strip() == expected


def _rays(scene, n, seed):
    rng = np.random.default_rng(seed)
    O = np.array([street_point(rng, z=rng.uniform(1, 40)) for _ in range(n)])
    D = rng.normal(size=(n, 3))
    return O, D / np.linalg.norm(D, axis=1, keepdims=True)


@needs_numba
def test_bvh_kernels_agree(manhattan):
    tree = manhattan.accel.bvh if hasattr(manhattan.accel, "bvh") else manhattan.accel
    O, D = _rays(manhattan, 3000, 1)
    tmin, tmax = np.zeros(len(O)), np.full(len(O), np.inf)
    t_nb, i_nb = nb_geom.nearest_batch(O, D, tmin, tmax, *tree.kernel_args())
    t_np, i_np = bvh._np_nearest(tree, O, D, tmin, tmax)
    assert np.array_equal(i_nb, i_np)
    assert np.allclose(t_nb, t_np, rtol=0, atol=1e-9, equal_nan=True)
    Q = O + 50.0 * D
    assert np.array_equal(nb_geom.blocked_batch(O, Q, 1e-4, *tree.kernel_args()),
                          bvh._np_blocked(tree, O, Q, 1e-4))
    up = np.broadcast_to([0.0, 0.0, 1.0], O.shape).copy()
    assert np.array_equal(nb_geom.face_hits_batch(O, up, np.inf, *tree.kernel_args(),
                                                  tree.tri_face),
                          bvh._np_face_hits(tree, O, up, np.inf))


@needs_numba
@pytest.mark.parametrize("diffraction", [True, False])
def test_sweep_backends_agree(manhattan, diffraction):
    cfg = tracer.TracerConfig(diffraction_enabled=diffraction)
    grid = radiomap.build_grid((0, 0, 200, 200), 8.0, 1.5, manhattan)
    pts = grid.centers()[grid.valid]
    for site in scenes.MANHATTAN_SITES:
        tx = radiomap.Transmitter(site["site_id"], site["position"])
        a = tracer.sweep_points(tx, pts, manhattan, cfg, backend="numba")
        b = tracer.sweep_points(tx, pts, manhattan, cfg, backend="numpy")
        assert a.backend == "numba" and b.backend == "numpy"
        assert np.array_equal(a.n_paths, b.n_paths)
        assert np.array_equal(a.truncated, b.truncated)
        ok = b.incoherent > 0
        assert np.allclose(a.coherent, b.coherent, rtol=1e-9, atol=0)
        assert np.allclose(a.incoherent[ok], b.incoherent[ok], rtol=1e-9, atol=0)


@needs_numba
def test_sweep_backends_agree_with_truncation(manhattan):
    cfg = tracer.TracerConfig(max_paths_per_link=3)
    rng = np.random.default_rng(8)
    pts = np.array([street_point(rng) for _ in range(200)])
    tx = radiomap.Transmitter("t", (100.0, 70.0, 10.0))
    a = tracer.sweep_points(tx, pts, manhattan, cfg, backend="numba")
    b = tracer.sweep_points(tx, pts, manhattan, cfg, backend="numpy")
    assert a.truncated.any()
    assert np.array_equal(a.n_paths, b.n_paths) and np.array_equal(a.truncated, b.truncated)
    assert np.allclose(a.coherent, b.coherent, rtol=1e-9, atol=0)


def test_numpy_threads_match_serial(manhattan):
    cfg = tracer.TracerConfig()
    grid = radiomap.build_grid((0, 0, 200, 200), 5.0, 1.5, manhattan)
    pts = grid.centers()[grid.valid]
    tx = radiomap.Transmitter("t", (170.0, 70.0, 15.0))
    a = tracer.sweep_points(tx, pts, manhattan, cfg, threads=1, backend="numpy")
    b = tracer.sweep_points(tx, pts, manhattan, cfg, threads=4, backend="numpy")
    assert np.array_equal(a.coherent, b.coherent) and np.array_equal(a.incoherent, b.incoherent)


def test_numba_request_without_numba_fails():
    code = ("import numpy as np\nfrom raytwin import tracer, scenes, radiomap\n"
            "tx = radiomap.Transmitter('t', (0.0, 0.0, 10.0))\n"
            "try:\n    tracer.sweep_points(tx, np.zeros((1, 3)), scenes.manhattan_scene(),"
            " backend='numba')\nexcept RuntimeError:\n    print('refused')\n")
    r = subprocess.run([sys.executable, "-c", code], env=_env(True), capture_output=True,
                       text=True, check=True)
    assert r.stdout.strip() == "refused"


def test_numpy_backend_matches_its_golden_files():
    r = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                        os.path.join(HERE, "test_appio.py"), "-k", "golden"],
                       env=_env(True), capture_output=True, text=True, cwd=HERE)
    assert r.returncode == 0, r.stdout[-2000:]


@needs_numba
def test_compiled_fresnel_tail_matches_scipy():
    from raytwin import em
    from raytwin._kernels import nb_physics
    us = np.concatenate([np.linspace(-30.0, 30.0, 4001), np.geomspace(30.0, 3e3, 200)])
    ref = em.fresnel_tail(us)
    got = np.array([nb_physics.fresnel_tail(float(u)) for u in us])
    assert np.max(np.abs(got - ref)) < 1e-10
    xs = np.geomspace(1e-6, 1e4, 300)
    f_ref = em.transition_function(xs)
    f_got = np.array([nb_physics.transition(float(x)) for x in xs])
    assert np.max(np.abs(f_got - f_ref)) < 1e-9
