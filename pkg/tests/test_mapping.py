import math

import numpy as np
import pytest

from avshuttle.errors import InvalidArgumentError
from avshuttle.geometry import PointCloud, Pose6, pose_between, pose_error, pose_to_transform
from avshuttle.mapping import MappingParams, build_map, load_map_points, save_map_points, voxel_downsample
from avshuttle.ndt import pack_keys, voxel_indices
from avshuttle.scene import simulate_scan


class TestVoxelDownsample:
    def test_single_point(self):
        out = voxel_downsample(PointCloud([[0.3, 0.4, 0.5]]), 0.2)
        np.testing.assert_allclose(out.points, [[0.3, 0.4, 0.5]])

    def test_midpoint(self):
        out = voxel_downsample(PointCloud([[0.01, 0.02, 0.03], [0.15, 0.1, 0.05]]), 0.2)
        np.testing.assert_allclose(out.points, [[0.08, 0.06, 0.04]])

    def test_count_matches_brute_force_buckets(self):
        g = np.arange(10) * 0.1
        pts = np.array([(x, y, z) for x in g for y in g for z in g]) + 1e-9
        buckets = {}
        for p in pts:
            buckets.setdefault(tuple(math.floor(c / 0.35) for c in p), []).append(p)
        out = voxel_downsample(PointCloud(pts), 0.35)
        assert len(out) == len(buckets)
        expected = sorted((k, np.mean(v, axis=0)) for k, v in buckets.items())
        np.testing.assert_allclose(out.points, np.array([m for _, m in expected]), atol=1e-12)

    def test_one_point_per_voxel(self, reference_scan):
        out = voxel_downsample(reference_scan, 0.2)
        keys = pack_keys(voxel_indices(out.points, 0.2))
        assert len(np.unique(keys)) == len(out)
        assert out.frame == reference_scan.frame

    def test_bad_leaf(self):
        with pytest.raises(InvalidArgumentError):
            voxel_downsample(PointCloud([[0, 0, 0]]), 0.0)

    def test_points_csv_round_trip(self, tmp_path, reference_scan):
        save_map_points(reference_scan, tmp_path / "m.csv")
        back = load_map_points(tmp_path / "m.csv")
        np.testing.assert_array_equal(back.points, reference_scan.points)


class TestBuildMap:
    def test_single_scan(self, reference_scan):
        m = build_map([reference_scan])
        assert m.keyframes == [(0, Pose6())]
        np.testing.assert_array_equal(m.map_cloud.points, voxel_downsample(reference_scan, 0.2).points)
        assert m.map_cloud.frame == "map"

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            build_map([])

    def test_stationary_gives_one_keyframe(self, reference_scan):
        m = build_map([reference_scan] * 4)
        assert len(m.keyframes) == 1
        assert m.diagnostics == []

    def test_odometry_length_checked(self, reference_scan):
        with pytest.raises(InvalidArgumentError):
            build_map([reference_scan] * 3, odometry=[Pose6()])

    def test_short_drive_and_gating(self, scene, lidar):
        truth = [Pose6(0.6 * i, 0.0, 1.8, 0.0, 0.0, 0.01 * i) for i in range(6)]
        scans = [simulate_scan(scene, p, lidar, 100 + i) for i, p in enumerate(truth)]
        odo = [Pose6()] + [pose_between(truth[i - 1], truth[i]) for i in range(1, 6)]
        params = MappingParams()
        m = build_map(scans, params, odo)
        idx = [i for i, _ in m.keyframes]
        assert idx == sorted(set(idx)) and idx[0] == 0
        assert m.keyframes[0][1] == Pose6()
        for (_, a), (_, b) in zip(m.keyframes, m.keyframes[1:]):
            dt, dr = pose_error(a, b)
            assert dt >= params.keyframe_translation or dr >= params.keyframe_rotation
        for i, p in m.keyframes:
            dt, dr = pose_error(p, pose_between(truth[0], truth[i]))
            assert dt < 0.1 and dr < math.radians(1)
        keys = pack_keys(voxel_indices(m.map_cloud.points, params.leaf_size))
        assert len(np.unique(keys)) == len(m.map_cloud)

    def test_deterministic(self, scene, lidar):
        scans = [simulate_scan(scene, Pose6(1.2 * i, 0, 1.8), lidar, i) for i in range(3)]
        odo = [Pose6()] + [Pose6(1.2, 0, 0)] * 2
        a, b = build_map(scans, odometry=odo), build_map(scans, odometry=odo)
        assert a.map_cloud.points.tobytes() == b.map_cloud.points.tobytes()
        assert a.keyframes == b.keyframes

    def test_unmatchable_scan_is_skipped(self, scene, lidar, reference_scan):
        far = PointCloud(reference_scan.points + [0, 0, 80.0])
        m = build_map([reference_scan, far, reference_scan])
        assert [i for i, _ in m.diagnostics] == [1]
        assert m.poses[1] is None
        assert len(m.keyframes) == 1
