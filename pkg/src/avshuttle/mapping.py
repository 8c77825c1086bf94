"""Point-cloud map building by sequential scan-to-map NDT registration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .geometry import PointCloud, Pose6, invert, pose_error, pose_to_transform, transform_to_pose
from .ndt import NdtGrid, RegistrationParams, build_grid, pack_keys, register, voxel_indices


def voxel_downsample(cloud: PointCloud, leaf: float) -> PointCloud:
    """Replace the points of each occupied voxel by their centroid.

    Voxels are anchored at the frame origin and the output is ordered by
    voxel index (x, then y, then z).
    """
    if not leaf > 0:
        raise InvalidArgumentError(f"leaf size must be positive, got {leaf!r}")
    pts = cloud.points
    if len(pts) == 0:
        return PointCloud(None, cloud.frame)
    keys = pack_keys(voxel_indices(pts, leaf))
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    sums = np.zeros((len(uniq), 3))
    np.add.at(sums, inverse, pts)
    return PointCloud(sums / counts[:, None], cloud.frame)


@dataclass
class MappingParams:
    leaf_size: float = 0.2
    keyframe_translation: float = 1.0
    keyframe_rotation: float = math.radians(5.0)
    cell_size: float = 1.0
    min_points: int = 6
    registration: RegistrationParams = field(default_factory=RegistrationParams)


@dataclass
class MapBuild:
    map_cloud: PointCloud
    keyframes: list
    params: MappingParams
    # estimated sensor pose per scan (None where the scan was skipped)
    poses: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    grid: NdtGrid | None = None


def _moved_enough(a: Pose6, b: Pose6, params: MappingParams) -> bool:
    dt, dr = pose_error(a, b)
    return dt >= params.keyframe_translation or dr >= params.keyframe_rotation


def build_map(scans, params: MappingParams | None = None, odometry=None) -> MapBuild:
    """Register each scan against the map built so far and append keyframes.

    The first scan defines the map frame. The initial guess for scan ``i`` is
    the last registered pose composed with ``odometry[i]`` (relative motion
    from scan ``i-1`` to ``i``) when odometry is given, else a constant
    velocity extrapolation of the last two registered poses. Scans whose
    registration does not converge are skipped and listed in ``diagnostics``.
    """
    params = params or MappingParams()
    scans = list(scans)
    if not scans:
        raise InvalidArgumentError("build_map needs at least one scan")
    if odometry is not None and len(odometry) != len(scans):
        raise InvalidArgumentError("odometry must have one entry per scan")

    identity = Pose6()
    map_cloud = voxel_downsample(PointCloud(scans[0].points, "map"), params.leaf_size)
    grid = build_grid(map_cloud, params.cell_size, params.min_points)
    keyframes = [(0, identity)]
    poses = [identity]
    diagnostics = []
    last_t = pose_to_transform(identity)
    prev_t = None
    # motion accumulated since the last registered scan (odometry mode)
    pending = np.eye(4)

    for i in range(1, len(scans)):
        if odometry is not None:
            pending = pending @ pose_to_transform(odometry[i])
            guess_t = last_t @ pending
        elif prev_t is not None:
            guess_t = last_t @ invert(prev_t) @ last_t
        else:
            guess_t = last_t
        src = voxel_downsample(scans[i], params.leaf_size)
        if len(src) < params.registration.min_points or len(grid) == 0:
            diagnostics.append((i, "too few points"))
            poses.append(None)
            continue
        res = register(grid, src, transform_to_pose(guess_t), params.registration)
        if not res.converged:
            diagnostics.append((i, f"registration did not converge after {res.iterations} iterations"))
            poses.append(None)
            continue
        poses.append(res.pose)
        prev_t, last_t = last_t, pose_to_transform(res.pose)
        pending = np.eye(4)
        if _moved_enough(keyframes[-1][1], res.pose, params):
            keyframes.append((i, res.pose))
            moved = PointCloud(scans[i].points, "map").transformed(last_t)
            map_cloud = voxel_downsample(map_cloud.concat(moved), params.leaf_size)
            grid = build_grid(map_cloud, params.cell_size, params.min_points)

    return MapBuild(map_cloud, keyframes, params, poses, diagnostics, grid)


def save_map_points(cloud: PointCloud, path) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,z\n")
        for x, y, z in cloud.points:
            fh.write(f"{float(x)!r},{float(y)!r},{float(z)!r}\n")


def load_map_points(path) -> PointCloud:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return PointCloud(data.reshape(-1, 3), "map")
