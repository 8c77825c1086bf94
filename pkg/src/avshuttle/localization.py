"""Map-matching localization of the vehicle and global anchoring.

Frame convention: registration returns the *sensor* pose in the map frame,
``T_ndt``. With ``T_lidar`` the sensor pose in the vehicle frame, the vehicle
pose in the map frame is ``T_ndt @ inv(T_lidar)``; a lidar mounted ahead of
the rear axle therefore puts the vehicle behind the registered sensor. The
global pose is ``T_o_gps @ T_map`` with ``T_o_gps`` the map origin expressed
in the global frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .geometry import PointCloud, Pose6, invert, normalize_angle, pose_to_transform, transform_to_pose
from .mapping import voxel_downsample
from .ndt import NdtGrid, RegistrationParams, ScanMatchResult, register


@dataclass(frozen=True)
class LocalizerConfig:
    lidar_extrinsic: Pose6 = Pose6()
    gps_anchor: Pose6 = Pose6()
    registration: RegistrationParams = field(default_factory=RegistrationParams)
    # scans are voxel-filtered at this leaf before matching (None keeps every point)
    scan_leaf: float | None = 0.4


@dataclass(frozen=True)
class LocalizationState:
    prev_pose: Pose6
    # planar twist: (forward speed m/s, yaw rate rad/s)
    prev_velocity: tuple = (0.0, 0.0)
    last_result: ScanMatchResult | None = None
    degraded: bool = False


def predict_initial_guess(state: LocalizationState, dt: float) -> Pose6:
    """Constant-velocity planar extrapolation; z, roll and pitch are held."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    p = state.prev_pose
    v, w = state.prev_velocity
    heading = p.yaw + 0.5 * w * dt
    return Pose6(
        p.x + v * math.cos(heading) * dt,
        p.y + v * math.sin(heading) * dt,
        p.z,
        p.roll,
        p.pitch,
        normalize_angle(p.yaw + w * dt),
    )


def _twist(a: Pose6, b: Pose6, dt: float) -> tuple:
    dyaw = normalize_angle(b.yaw - a.yaw)
    heading = a.yaw + 0.5 * dyaw
    forward = (b.x - a.x) * math.cos(heading) + (b.y - a.y) * math.sin(heading)
    return forward / dt, dyaw / dt


def localize_scan(map_grid: NdtGrid, scan: PointCloud, state: LocalizationState, cfg: LocalizerConfig,
                  dt: float):
    """Match one sensor-frame scan against the map.

    Returns ``(vehicle pose in map frame, new state)``. When registration does
    not converge the predicted pose is returned, ``state.degraded`` is set,
    and the velocity estimate is left untouched. Velocity is only estimated
    between two registered frames.
    """
    predicted = predict_initial_guess(state, dt)
    t_lidar = pose_to_transform(cfg.lidar_extrinsic)
    sensor_guess = transform_to_pose(pose_to_transform(predicted) @ t_lidar)
    cloud = voxel_downsample(scan, cfg.scan_leaf) if cfg.scan_leaf else scan
    if len(cloud) < cfg.registration.min_points:
        return predicted, replace(state, prev_pose=predicted, last_result=None, degraded=True)
    result = register(map_grid, cloud, sensor_guess, cfg.registration)
    if not result.converged:
        return predicted, replace(state, prev_pose=predicted, last_result=result, degraded=True)
    vehicle = transform_to_pose(pose_to_transform(result.pose) @ invert(t_lidar))
    # the starting pose is a prior, not a measurement: differencing against it
    # would turn the first correction into a velocity
    measured = state.last_result is not None and not state.degraded
    velocity = _twist(state.prev_pose, vehicle, dt) if dt > 0 and measured else state.prev_velocity
    return vehicle, LocalizationState(vehicle, velocity, result, False)


def to_global(vehicle_pose_map: Pose6, cfg: LocalizerConfig) -> Pose6:
    return transform_to_pose(pose_to_transform(cfg.gps_anchor) @ pose_to_transform(vehicle_pose_map))


def to_map(global_pose: Pose6, cfg: LocalizerConfig) -> Pose6:
    return transform_to_pose(invert(pose_to_transform(cfg.gps_anchor)) @ pose_to_transform(global_pose))
