import math

import numpy as np
import pytest

from avshuttle.errors import InvalidArgumentError, ValidationError
from avshuttle.geometry import Pose6, pose_to_transform
from avshuttle.scene import Box, Cylinder, LidarConfig, Scene, load_scene, ray_cast, save_scene, simulate_scan


class TestPrimitives:
    def test_box_validation(self):
        with pytest.raises(ValidationError):
            Box((0, 0, 0), (1, 0, 1))

    def test_cylinder_validation(self):
        with pytest.raises(ValidationError):
            Cylinder((0, 0, 0), 0.0, 1.0)
        with pytest.raises(ValidationError):
            Cylinder((0, 0, 0), 1.0, -1.0)

    def test_scene_json_round_trip(self, tmp_path, scene):
        save_scene(scene, tmp_path / "s.json")
        assert load_scene(tmp_path / "s.json").to_dict() == scene.to_dict()

    def test_malformed_scene(self):
        with pytest.raises(ValidationError):
            Scene.from_dict({"boxes": [{"min": [0, 0, 0]}]})


class TestRayCast:
    def test_vertical_drop(self):
        assert ray_cast(Scene(0.0), (0, 0, 1), (0, 0, -1)) == pytest.approx(1.0)

    def test_sky_miss(self):
        assert ray_cast(Scene(0.0), (0, 0, 1), (0, 0, 1)) is None

    def test_box_slab(self):
        s = Scene(None, [Box((3, -1, 0), (4, 1, 2))])
        assert ray_cast(s, (0, 0, 1), (1, 0, 0)) == pytest.approx(3.0)

    def test_nearest_hit_wins(self):
        s = Scene(0.0, [Box((3, -1, 0), (4, 1, 2)), Box((6, -1, 0), (7, 1, 2))])
        assert ray_cast(s, (0, 0, 1), (1, 0, 0)) == pytest.approx(3.0)

    def test_cylinder_side_and_cap(self):
        s = Scene(None, cylinders=[Cylinder((5, 0, 0), 0.5, 2.0)])
        assert ray_cast(s, (0, 0, 1), (1, 0, 0)) == pytest.approx(4.5)
        assert ray_cast(s, (5, 0, 10), (0, 0, -1)) == pytest.approx(8.0)
        assert ray_cast(s, (0, 0, 3), (1, 0, 0)) is None

    def test_inside_box_hits_far_face(self):
        s = Scene(None, [Box((-1, -1, -1), (1, 1, 1))])
        assert ray_cast(s, (0, 0, 0), (1, 0, 0)) == pytest.approx(1.0)

    def test_non_unit_direction(self):
        with pytest.raises(InvalidArgumentError):
            ray_cast(Scene(0.0), (0, 0, 1), (0, 0, -2))


class TestLidarConfig:
    def test_defaults(self):
        cfg = LidarConfig()
        assert cfg.channels == 16
        assert cfg.n_azimuth == 900
        assert math.degrees(cfg.elevation_angles[0]) == pytest.approx(-15.0)
        assert math.degrees(cfg.elevation_angles[-1]) == pytest.approx(15.0)

    @pytest.mark.parametrize("kw", [
        {"min_range": 0.0}, {"min_range": 5.0, "max_range": 4.0}, {"range_noise_sigma": -1.0},
        {"azimuth_step": math.radians(0.7)}, {"channels": 3},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            LidarConfig(**kw)

    def test_dict_round_trip(self):
        cfg = LidarConfig(range_noise_sigma=0.02, mount=Pose6(1, 0, 2))
        assert LidarConfig.from_dict(cfg.to_dict()) == cfg

    def test_ray_order_channel_major(self):
        d = LidarConfig().ray_directions()
        assert d.shape == (16 * 900, 3)
        np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0)
        assert np.all(d[:900, 2] == d[0, 2])


class TestSimulateScan:
    def test_empty_world(self, lidar):
        assert len(simulate_scan(Scene(None), Pose6(z=1.8), lidar, 0)) == 0

    def test_ground_ring_range(self):
        cfg = LidarConfig(range_noise_sigma=0.0)
        cloud = simulate_scan(Scene(0.0), Pose6(z=1.8), cfg, 0)
        low = cloud.points[:900]
        np.testing.assert_allclose(np.linalg.norm(low, axis=1), 1.8 / math.sin(math.radians(15)), rtol=1e-12)
        assert math.isclose(1.8 / math.sin(math.radians(15)), 6.955, abs_tol=5e-4)

    def test_ray_budget(self, scene, lidar):
        assert len(simulate_scan(scene, Pose6(z=1.8), lidar, 0)) <= lidar.channels * lidar.n_azimuth

    def test_deterministic(self, scene, lidar):
        a = simulate_scan(scene, Pose6(1, 2, 1.8, 0, 0, 0.3), lidar, 42)
        b = simulate_scan(scene, Pose6(1, 2, 1.8, 0, 0, 0.3), lidar, 42)
        assert a.points.tobytes() == b.points.tobytes()
        c = simulate_scan(scene, Pose6(1, 2, 1.8, 0, 0, 0.3), lidar, 43)
        assert a.points.tobytes() != c.points.tobytes()

    def test_range_gate(self, scene):
        cfg = LidarConfig(range_noise_sigma=0.05, max_range=12.0, min_range=2.0)
        r = np.linalg.norm(simulate_scan(scene, Pose6(z=1.8), cfg, 1).points, axis=1)
        assert r.min() >= cfg.min_range
        assert r.max() <= cfg.max_range + 4 * cfg.range_noise_sigma

    def test_recast_reproduces_range(self, scene):
        cfg = LidarConfig(range_noise_sigma=0.0)
        pose = Pose6(0.5, -0.3, 1.8, 0.01, -0.02, 0.4)
        cloud = simulate_scan(scene, pose, cfg, 0)
        t = pose_to_transform(pose)
        for p in cloud.points[::997]:
            r = np.linalg.norm(p)
            d_world = t[:3, :3] @ (p / r)
            assert ray_cast(scene, t[:3, 3], d_world) == pytest.approx(r, abs=1e-9)

    def test_sensor_frame(self):
        # a 30 m high wall straight ahead at x = 10 m in world, sensor yawed +90 deg
        cfg = LidarConfig(range_noise_sigma=0.0)
        s = Scene(None, [Box((-50, 10, -50), (50, 11, 50))])
        cloud = simulate_scan(s, Pose6(0, 0, 0, 0, 0, math.pi / 2), cfg, 0)
        # in the sensor frame the wall is along +x
        assert np.all(cloud.points[:, 0] > 0)
        np.testing.assert_allclose(cloud.points[:, 0].min(), 10.0, atol=1e-9)
        assert cloud.frame == "sensor"
