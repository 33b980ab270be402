"""Synthetic scenes used for validation, benchmarks and demos.

Building walls sit on even metre coordinates so that a 2 m receiver grid
(cell centres on odd coordinates) never samples a point on a wall plane.
"""

import math

import numpy as np

from .geometry import TriangleMesh, build_scene

BOX_SIDES = [[0, 1, 5], [0, 5, 4], [1, 2, 6], [1, 6, 5], [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7]]
BOX_TOP = [[4, 5, 6], [4, 6, 7]]
BOX_BOTTOM = [[0, 2, 1], [0, 3, 2]]


def quad(p0, p1, p2, p3, object_id, material):
    """Quad p0-p1-p2-p3, counter-clockwise seen from the front side."""
    v = np.array([p0, p1, p2, p3], dtype=np.float64)
    return TriangleMesh(v, np.array([[0, 1, 2], [0, 2, 3]]), object_id, material)


def ground_mesh(xmin, ymin, xmax, ymax, z=0.0, material="ground", object_id="ground"):
    return quad((xmin, ymin, z), (xmax, ymin, z), (xmax, ymax, z), (xmin, ymax, z), object_id,
                material)


def box_mesh(x0, y0, x1, y1, height, object_id, material="concrete", bottom=False, z0=0.0):
    v = np.array([[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
                  [x0, y0, height], [x1, y0, height], [x1, y1, height], [x0, y1, height]],
                 dtype=np.float64)
    tris = BOX_SIDES + BOX_TOP + (BOX_BOTTOM if bottom else [])
    return TriangleMesh(v, np.array(tris), object_id, material)


MANHATTAN_SIZE = 200.0
MANHATTAN_BLOCKS = [(20.0, 60.0), (80.0, 120.0), (140.0, 180.0)]
MANHATTAN_HEIGHTS = [[24.0, 36.0, 18.0], [30.0, 42.0, 27.0], [21.0, 33.0, 45.0]]


def manhattan_meshes():
    meshes = [ground_mesh(0.0, 0.0, MANHATTAN_SIZE, MANHATTAN_SIZE)]
    for j, (y0, y1) in enumerate(MANHATTAN_BLOCKS):
        for i, (x0, x1) in enumerate(MANHATTAN_BLOCKS):
            meshes.append(box_mesh(x0, y0, x1, y1, MANHATTAN_HEIGHTS[j][i], f"block_{j}{i}"))
    return meshes


def manhattan_scene():
    """200 x 200 m ground with a 3 x 3 grid of open-bottom concrete blocks (46 faces)."""
    return build_scene(manhattan_meshes())


# three sites: two rooftop corners and a street mast
MANHATTAN_SITES = [
    {"site_id": "roof_sw", "position": (58.0, 58.0, 27.0), "bearing": 45.0, "downtilt": 10.0},
    {"site_id": "roof_ne", "position": (142.0, 142.0, 48.0), "bearing": 225.0, "downtilt": 12.0},
    {"site_id": "mast_e", "position": (170.0, 70.0, 15.0), "bearing": 300.0, "downtilt": 6.0},
]


def knife_edge_meshes(height=10.0, half_width=200.0, depth=20.0, interior_deg=1.0):
    """Thin two-faced screen in the plane x = 0 whose top edge runs along y.

    The faces meet at the top edge with a small interior angle, so the edge is
    a convex wedge with n close to 2 (a half-plane).
    """
    half = math.tan(math.radians(interior_deg) / 2.0) * depth
    bot = height - depth
    y0, y1 = -half_width, half_width
    front = quad((half, y0, bot), (half, y1, bot), (0.0, y1, height), (0.0, y0, height),
                 "screen_front", "concrete")
    back = quad((-half, y1, bot), (-half, y0, bot), (0.0, y0, height), (0.0, y1, height),
                "screen_back", "concrete")
    v = np.concatenate([front.vertices, back.vertices])
    t = np.concatenate([front.triangles, back.triangles + 4])
    return [TriangleMesh(v, t, "screen", "concrete")]


def knife_edge_scene(**kw):
    return build_scene(knife_edge_meshes(**kw))


def parallel_walls_meshes(gap=10.0, half=60.0, material="metal"):
    """Two facing walls at x = 0 (normal +x) and x = gap (normal -x)."""
    w0 = quad((0.0, -half, -half), (0.0, half, -half), (0.0, half, half), (0.0, -half, half),
              "wall_w", material)
    w1 = quad((gap, half, -half), (gap, -half, -half), (gap, -half, half), (gap, half, half),
              "wall_e", material)
    return [w0, w1]


def parallel_walls_scene(**kw):
    return build_scene(parallel_walls_meshes(**kw))


def manhattan_deployment(spacing=2.0, render=True, **overrides):
    """Deployment document for the Manhattan fixture with its three sites."""
    doc = {
        "carrier_hz": 10e9,
        "bandwidth_hz": 400e6,
        "grid": {"region": [0.0, 0.0, MANHATTAN_SIZE, MANHATTAN_SIZE], "spacing": spacing,
                 "rx_height": 1.5},
        "transmitters": [{"site_id": s["site_id"], "position": list(s["position"]),
                          "orientation": {"bearing": s["bearing"], "downtilt": s["downtilt"]}}
                         for s in MANHATTAN_SITES],
        "render": {"enabled": render},
    }
    doc.update(overrides)
    return doc
