"""Rigid-body poses, z-y-x Euler rotations and frame composition.

Rotation convention
-------------------
A pose stores ``(x, y, z, roll, pitch, yaw)``. Its rotation block is the
intrinsic z-y-x product::

    R = Rz(yaw) @ Ry(pitch) @ Rx(roll)

    Rz(a) = [[c, -s, 0], [s, c, 0], [0, 0, 1]]
    Ry(a) = [[c, 0, s], [0, 1, 0], [-s, 0, c]]
    Rx(a) = [[1, 0, 0], [0, c, -s], [0, s, c]]

so a body-frame vector is first rotated by roll about x, then by pitch about
y, then by yaw about z. Transforms are 4x4 homogeneous numpy arrays that map
child-frame coordinates into the parent frame: ``p_parent = T @ p_child``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

GIMBAL_EPS = 1e-6


def normalize_angle(theta: float) -> float:
    """Wrap an angle into the half-open interval (-pi, pi]."""
    if not math.isfinite(theta):
        raise InvalidArgumentError(f"angle must be finite, got {theta!r}")
    r = math.remainder(theta, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@dataclass(frozen=True)
class Pose6:
    """Translation in meters plus z-y-x Euler angles in radians.

    Angles are wrapped into (-pi, pi] on construction.
    """

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidArgumentError(f"Pose6.{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        for name in ("roll", "pitch", "yaw"):
            object.__setattr__(self, name, normalize_angle(float(getattr(self, name))))

    @classmethod
    def from_vector(cls, v) -> "Pose6":
        return cls(*(float(a) for a in v))

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.roll, self.pitch, self.yaw])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidArgumentError(f"Point3.{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


FRAMES = ("sensor", "map", "world")


class PointCloud:
    """Ordered ``(N, 3)`` float64 array of points tagged with a frame label."""

    __slots__ = ("points", "frame")

    def __init__(self, points=None, frame: str = "sensor"):
        if frame not in FRAMES:
            raise InvalidArgumentError(f"unknown frame {frame!r}; expected one of {FRAMES}")
        if points is None:
            arr = np.empty((0, 3))
        else:
            arr = np.asarray(points, dtype=np.float64)
            if arr.size == 0:
                arr = np.empty((0, 3))
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise InvalidArgumentError(f"points must have shape (N, 3), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("point cloud contains non-finite coordinates")
        self.points = arr
        self.frame = frame

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"PointCloud(n={len(self)}, frame={self.frame!r})"

    def transformed(self, t: np.ndarray, frame: str | None = None) -> "PointCloud":
        return PointCloud(transform_points(t, self.points), frame or self.frame)

    def concat(self, other: "PointCloud") -> "PointCloud":
        if other.frame != self.frame:
            raise InvalidArgumentError(f"cannot merge {self.frame!r} and {other.frame!r} clouds")
        return PointCloud(np.vstack([self.points, other.points]), self.frame)


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    return _rz(yaw) @ _ry(pitch) @ _rx(roll)


def euler_rotation_derivatives(roll: float, pitch: float, yaw: float):
    """First and second partials of ``Rz(yaw) Ry(pitch) Rx(roll)``.

    Returns ``(d1, d2)`` where ``d1[i]`` is dR/d(angle_i) and ``d2[i][j]`` is
    d2R/d(angle_i)d(angle_j), angles ordered (roll, pitch, yaw).
    """
    rx, ry, rz = _rx(roll), _ry(pitch), _rz(yaw)

    # d/da of each elementary rotation, and the second derivative (= -R with the axis row/column zeroed)
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sr, -cr], [0.0, cr, -sr]])
    dry = np.array([[-sp, 0.0, cp], [0.0, 0.0, 0.0], [-cp, 0.0, -sp]])
    drz = np.array([[-sy, -cy, 0.0], [cy, -sy, 0.0], [0.0, 0.0, 0.0]])
    ddrx = np.array([[0.0, 0.0, 0.0], [0.0, -cr, sr], [0.0, -sr, -cr]])
    ddry = np.array([[-cp, 0.0, -sp], [0.0, 0.0, 0.0], [sp, 0.0, -cp]])
    ddrz = np.array([[-cy, sy, 0.0], [-sy, -cy, 0.0], [0.0, 0.0, 0.0]])

    d1 = [rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx]
    d_rr = rz @ ry @ ddrx
    d_rp = rz @ dry @ drx
    d_ry = drz @ ry @ drx
    d_pp = rz @ ddry @ rx
    d_py = drz @ dry @ rx
    d_yy = ddrz @ ry @ rx
    d2 = [[d_rr, d_rp, d_ry], [d_rp, d_pp, d_py], [d_ry, d_py, d_yy]]
    return d1, d2


def pose_to_transform(p: Pose6) -> np.ndarray:
    t = np.eye(4)
    t[:3, :3] = euler_to_rotation(p.roll, p.pitch, p.yaw)
    t[:3, 3] = (p.x, p.y, p.z)
    return t


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b


def invert(t: np.ndarray) -> np.ndarray:
    r = t[:3, :3]
    out = np.eye(4)
    out[:3, :3] = r.T
    out[:3, 3] = -r.T @ t[:3, 3]
    return out


def transform_point(t: np.ndarray, p) -> Point3:
    v = p.as_array() if isinstance(p, Point3) else np.asarray(p, dtype=float)
    return Point3(*(t[:3, :3] @ v + t[:3, 3]))


def transform_points(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Vectorised ``transform_point`` over an ``(N, 3)`` array."""
    pts = np.asarray(pts, dtype=float)
    return pts @ t[:3, :3].T + t[:3, 3]


def transform_to_pose(t: np.ndarray, with_flag: bool = False):
    """Recover ``Pose6`` from a rigid transform.

    Pitch is returned in [-pi/2, pi/2]. Within ``GIMBAL_EPS`` of +-pi/2 roll is
    fixed to 0 and the whole in-plane rotation is assigned to yaw; pass
    ``with_flag=True`` to also receive whether that happened.
    """
    r = t[:3, :3]
    cos_pitch = math.hypot(r[0, 0], r[1, 0])
    pitch = math.atan2(-r[2, 0], cos_pitch)
    locked = abs(abs(pitch) - math.pi / 2) < GIMBAL_EPS
    if locked:
        roll = 0.0
        yaw = math.atan2(-r[0, 1], r[1, 1])
    else:
        roll = math.atan2(r[2, 1], r[2, 2])
        yaw = math.atan2(r[1, 0], r[0, 0])
    pose = Pose6(t[0, 3], t[1, 3], t[2, 3], roll, pitch, yaw)
    if with_flag:
        return pose, locked
    return pose


def pose_compose(a: Pose6, b: Pose6) -> Pose6:
    return transform_to_pose(pose_to_transform(a) @ pose_to_transform(b))


def pose_between(a: Pose6, b: Pose6) -> Pose6:
    """Relative pose of ``b`` expressed in the frame of ``a``."""
    return transform_to_pose(invert(pose_to_transform(a)) @ pose_to_transform(b))


def pose_error(a: Pose6, b: Pose6) -> tuple[float, float]:
    """(translation distance in m, rotation angle in rad) between two poses."""
    d = invert(pose_to_transform(a)) @ pose_to_transform(b)
    r = d[:3, :3]
    sin_angle = 0.5 * math.sqrt((r[2, 1] - r[1, 2]) ** 2 + (r[0, 2] - r[2, 0]) ** 2 + (r[1, 0] - r[0, 1]) ** 2)
    cos_angle = (np.trace(r) - 1.0) / 2.0
    return float(np.linalg.norm(d[:3, 3])), float(math.atan2(sin_angle, cos_angle))
