import math

import numpy as np
import pytest

from avshuttle.geometry import Pose6, pose_to_transform, transform_to_pose
from avshuttle.localization import (LocalizationState, LocalizerConfig, localize_scan, predict_initial_guess,
                                    to_global, to_map)
from avshuttle.mapping import voxel_downsample
from avshuttle.ndt import build_grid
from avshuttle.scene import LidarConfig, simulate_scan

from conftest import random_pose


class TestPredict:
    def test_zero_velocity(self):
        p = Pose6(1, 2, 3, 0.1, 0.2, 0.3)
        assert predict_initial_guess(LocalizationState(p), 0.5) == p

    def test_forward(self):
        out = predict_initial_guess(LocalizationState(Pose6(), (2.0, 0.0)), 0.1)
        assert out.x == pytest.approx(0.2)
        assert out.y == 0.0

    def test_yaw_rate(self):
        out = predict_initial_guess(LocalizationState(Pose6(yaw=math.pi - 0.01), (0.0, 0.1)), 0.5)
        assert out.yaw == pytest.approx(-math.pi + 0.04)

    def test_holds_z_roll_pitch(self):
        p = Pose6(0, 0, 1.5, 0.05, -0.02, 0.3)
        out = predict_initial_guess(LocalizationState(p, (3.0, 0.2)), 0.1)
        assert (out.z, out.roll, out.pitch) == (p.z, p.roll, p.pitch)

    def test_negative_dt(self):
        with pytest.raises(ValueError):
            predict_initial_guess(LocalizationState(Pose6()), -0.1)


class TestGlobal:
    def test_identity_anchor(self):
        p = Pose6(1, 2, 0, 0, 0, 0.4)
        assert to_global(p, LocalizerConfig()) == p

    def test_translation_anchor(self):
        cfg = LocalizerConfig(gps_anchor=Pose6(100, 200, 0))
        out = to_global(Pose6(1, 1, 0), cfg)
        np.testing.assert_allclose(out.translation, [101, 201, 0])

    def test_rotated_anchor(self):
        cfg = LocalizerConfig(gps_anchor=Pose6(yaw=math.pi / 2))
        np.testing.assert_allclose(to_global(Pose6(1, 0, 0), cfg).translation, [0, 1, 0], atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            cfg = LocalizerConfig(gps_anchor=random_pose(rng, 500.0))
            p = random_pose(rng, 50.0)
            back = to_map(to_global(p, cfg), cfg)
            np.testing.assert_allclose(pose_to_transform(back), pose_to_transform(p), atol=1e-10)


@pytest.fixture(scope="module")
def small_map(scene):
    # scans from known poses around the origin, assembled in the frame of a sensor at (0, 0, 1.8)
    cfg = LidarConfig()
    rng = np.random.default_rng(7)
    clouds = []
    for i in range(12):
        p = Pose6(rng.uniform(-3, 3), rng.uniform(-3, 3), 1.8, 0, 0, rng.uniform(-1, 1))
        t = pose_to_transform(Pose6(0, 0, -1.8)) @ pose_to_transform(p)
        clouds.append(simulate_scan(scene, p, cfg, 50 + i).transformed(t, "map"))
    cloud = clouds[0]
    for c in clouds[1:]:
        cloud = cloud.concat(c)
    return build_grid(voxel_downsample(cloud, 0.2))


class TestLocalizeScan:
    def test_identity_extrinsic_returns_registration_pose(self, scene, small_map):
        cfg = LocalizerConfig()
        scan = simulate_scan(scene, Pose6(0.5, 0.0, 1.8), LidarConfig(), 7)
        state = LocalizationState(Pose6(0.4, 0.0, 0.0))
        pose, new = localize_scan(small_map, scan, state, cfg, 0.0)
        assert new.last_result.converged
        np.testing.assert_allclose(pose_to_transform(pose), pose_to_transform(new.last_result.pose), atol=1e-12)
        assert abs(pose.x - 0.5) < 0.05 and abs(pose.y) < 0.05

    def test_stationary_drift(self, scene, small_map):
        cfg = LocalizerConfig(scan_leaf=None)
        scan = simulate_scan(scene, Pose6(1.0, 0.0, 1.8), LidarConfig(), 11)
        state = LocalizationState(Pose6(1.0, 0.0, 0.0))
        poses = []
        for _ in range(4):
            pose, state = localize_scan(small_map, scan, state, cfg, 0.1)
            poses.append(pose)
        for a, b in zip(poses, poses[1:]):
            assert math.hypot(b.x - a.x, b.y - a.y) < 1e-3

    def test_forward_mounted_lidar(self, scene, small_map):
        # vehicle at map (0, 0, -1.8) facing +x; lidar 1 m ahead and 1.8 m up
        mount = Pose6(1.0, 0.0, 1.8)
        cfg = LocalizerConfig(lidar_extrinsic=mount)
        vehicle_world = Pose6(-1.0, 0.0, 0.0)
        sensor_world = transform_to_pose(pose_to_transform(vehicle_world) @ pose_to_transform(mount))
        assert sensor_world.x == pytest.approx(0.0)
        scan = simulate_scan(scene, sensor_world, LidarConfig(mount=mount), 5)
        state = LocalizationState(Pose6(-1.05, 0.02, -1.8))
        pose, new = localize_scan(small_map, scan, state, cfg, 0.0)
        # registered sensor sits at the map origin; the vehicle is 1 m behind it
        assert abs(new.last_result.pose.x) < 0.05
        assert math.hypot(pose.x + 1.0, pose.y) < 0.05
        assert pose.z == pytest.approx(-1.8, abs=0.05)

    def test_degraded_holds_prediction_and_velocity(self, scene, small_map):
        cfg = LocalizerConfig()
        scan = simulate_scan(scene, Pose6(0.0, 0.0, 1.8), LidarConfig(), 3)
        state = LocalizationState(Pose6(0, 0, 60.0), (5.0, 0.1))
        pose, new = localize_scan(small_map, scan, state, cfg, 0.1)
        assert new.degraded
        assert pose == predict_initial_guess(state, 0.1)
        assert new.prev_velocity == state.prev_velocity
        assert new.prev_pose == pose

    def test_velocity_from_finite_difference(self, scene, small_map):
        cfg = LocalizerConfig()
        s0 = simulate_scan(scene, Pose6(0.0, 0.0, 1.8), LidarConfig(), 1)
        s1 = simulate_scan(scene, Pose6(1.0, 0.0, 1.8), LidarConfig(), 2)
        state = LocalizationState(Pose6(), (0.0, 0.0))
        _, state = localize_scan(small_map, s0, state, cfg, 0.0)
        _, state = localize_scan(small_map, s1, state, cfg, 0.5)
        v, w = state.prev_velocity
        assert v == pytest.approx(2.0, abs=0.1)
        assert abs(w) < 0.02


def test_straight_drive_error_has_small_mean():
    from avshuttle.control import Route
    from avshuttle.demo import corridor_scene
    from avshuttle.sim import MapDriveParams, ScenarioConfig, drive_for_map, localize_drive

    scene = corridor_scene()
    xs = np.arange(0.0, 60.0 + 1e-9, 1.0)
    route = Route(np.column_stack([xs, np.zeros_like(xs)]))
    # exact odometry while mapping keeps map error out of the localization error
    drive = MapDriveParams(scan_every=6, odometry_sigma=(0.0, 0.0))
    cfg = ScenarioConfig(scene=scene, route=route, mode="ndt", map_source="build-from-drive", dt=0.05, seed=2,
                         map_drive=drive)
    built, anchor = drive_for_map(scene, route, cfg)
    rows = localize_drive(scene, route, built.grid, anchor, cfg)
    assert len(rows) >= 100
    err = np.array([(e[0] - t[0], e[1] - t[1]) for _, e, t, _, _ in rows])
    assert np.all(np.abs(err.mean(axis=0)) < 0.05)
    assert all(conv for *_, conv in rows)
