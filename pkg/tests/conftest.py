import json
import os
import sys

import numpy as np
import pytest
import yaml
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from raytwin import geometry, scenes  # noqa: E402

settings.register_profile("raytwin", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("raytwin")

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


@pytest.fixture(scope="session")
def manhattan():
    return scenes.manhattan_scene()


@pytest.fixture(scope="session")
def box_scene():
    return geometry.build_scene([scenes.box_mesh(0.0, 0.0, 10.0, 10.0, 10.0, "box", bottom=True)])


@pytest.fixture(scope="session")
def empty_scene():
    return geometry.load_scene({"version": 1, "units": "m", "objects": []})


def write_inputs(tmp, meshes, deployment):
    scene_path = os.path.join(tmp, "scene.json")
    cfg_path = os.path.join(tmp, "deployment.yaml")
    with open(scene_path, "w") as fh:
        json.dump(geometry.scene_document(meshes), fh)
    with open(cfg_path, "w") as fh:
        yaml.safe_dump(deployment, fh)
    return scene_path, cfg_path


def street_point(rng, z=1.5):
    """Random receiver position outside every Manhattan block."""
    while True:
        p = np.array([rng.uniform(1.0, 199.0), rng.uniform(1.0, 199.0), z])
        inside = any(a - 0.5 <= p[0] <= b + 0.5 and c - 0.5 <= p[1] <= d + 0.5
                     for a, b in scenes.MANHATTAN_BLOCKS for c, d in scenes.MANHATTAN_BLOCKS)
        if not inside:
            return p


ACCEPTANCE = {}  # criterion number -> (passed, line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n][1])
