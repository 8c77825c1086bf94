import math

import numpy as np
import pytest
from hypothesis import settings

from avshuttle.geometry import Pose6
from avshuttle.scene import Box, Cylinder, LidarConfig, Scene, simulate_scan

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def structured_scene() -> Scene:
    """Ground plus five boxes and three poles around the origin."""
    boxes = [
        Box((8, -6, 0), (10, -3, 3)),
        Box((-12, 4, 0), (-9, 9, 4)),
        Box((3, 7, 0), (6, 8, 2.5)),
        Box((-6, -11, 0), (-2, -9, 3)),
        Box((15, 2, 0), (17, 5, 5)),
    ]
    cylinders = [Cylinder((4, -4, 0), 0.3, 4), Cylinder((-5, 3, 0), 0.4, 5), Cylinder((12, 9, 0), 0.3, 4)]
    return Scene(0.0, boxes, cylinders)


SENSOR_HEIGHT = 1.8


@pytest.fixture(scope="session")
def scene():
    return structured_scene()


@pytest.fixture(scope="session")
def lidar():
    return LidarConfig()


@pytest.fixture(scope="session")
def reference_scan(scene, lidar):
    return simulate_scan(scene, Pose6(0, 0, SENSOR_HEIGHT), lidar, 0)


def random_pose(rng, max_t=5.0, max_pitch=math.pi / 2 - 0.1) -> Pose6:
    return Pose6(*rng.uniform(-max_t, max_t, 3), rng.uniform(-math.pi, math.pi),
                 rng.uniform(-max_pitch, max_pitch), rng.uniform(-math.pi, math.pi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
