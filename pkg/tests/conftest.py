import os
import sys

import numpy as np
import pytest

import bvhgen
from poselift import bvh
from poselift.skeleton import FRAME_CAMERA, Pose3D

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def load_fixture(name):
    with open(os.path.join(DATA_DIR, name), "r", encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def minimal_doc():
    return bvh.parse_bvh(load_fixture("minimal.bvh"))


@pytest.fixture(scope="session")
def cmu_doc():
    return bvh.parse_bvh(load_fixture("cmu_style.bvh"))


@pytest.fixture(scope="session")
def h36m_doc():
    return bvh.parse_bvh(bvhgen.make_h36m_bvh(n_upright=40, n_lying=6, seed=11))


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, printed after the run."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.write_line("")
    for line in mod.format_results():
        terminalreporter.write_line(line)


def random_camera_pose(rng, depth=3000.0):
    """A plausible standing pose in the camera frame (y down)."""
    coords = np.array([
        [0, 0, 0], [-130, 0, 0], [-130, 440, 0], [-130, 880, 0],
        [130, 0, 0], [130, 440, 0], [130, 880, 0],
        [0, -150, 0], [0, -400, 0], [0, -510, 0], [0, -630, 0],
        [180, -460, 0], [460, -460, 0], [710, -460, 0],
        [-180, -460, 0], [-460, -460, 0], [-710, -460, 0],
    ], dtype=float)
    coords = coords + rng.normal(0.0, 40.0, size=coords.shape)
    coords[:, 2] += depth
    return Pose3D(coords, FRAME_CAMERA)
