"""Primitive-based world model and a ray-cast multi-channel lidar.

The scene is a horizontal ground plane plus axis-aligned boxes and vertical
cylinders. A cylinder's ``center`` is the centre of its *base* disk; it
extends upward by ``height``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ValidationError
from .geometry import Pose6, PointCloud, pose_to_transform

_HIT_EPS = 1e-9


@dataclass(frozen=True)
class Box:
    min: tuple
    max: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.min)
        hi = tuple(float(v) for v in self.max)
        if len(lo) != 3 or len(hi) != 3 or not all(a < b for a, b in zip(lo, hi)):
            raise ValidationError(f"box needs min < max componentwise, got {lo} / {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)


@dataclass(frozen=True)
class Cylinder:
    center: tuple
    radius: float
    height: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 3:
            raise ValidationError(f"cylinder center must be 3D, got {c}")
        if not (self.radius > 0 and self.height > 0):
            raise ValidationError(f"cylinder radius and height must be positive, got {self.radius}, {self.height}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "height", float(self.height))


@dataclass
class Scene:
    ground_z: float | None = 0.0
    boxes: list = field(default_factory=list)
    cylinders: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ground_z": self.ground_z,
            "boxes": [{"min": list(b.min), "max": list(b.max)} for b in self.boxes],
            "cylinders": [
                {"center": list(c.center), "radius": c.radius, "height": c.height} for c in self.cylinders
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        try:
            return cls(
                ground_z=None if d.get("ground_z") is None else float(d["ground_z"]),
                boxes=[Box(b["min"], b["max"]) for b in d.get("boxes", [])],
                cylinders=[Cylinder(c["center"], c["radius"], c["height"]) for c in d.get("cylinders", [])],
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed scene document: {exc!r}") from exc


def load_scene(path) -> Scene:
    with open(path) as fh:
        return Scene.from_dict(json.load(fh))


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class LidarConfig:
    """Spinning lidar. Defaults resemble a 16-channel low-cost unit."""

    channels: int = 16
    elevation_angles: tuple = tuple(np.radians(np.linspace(-15.0, 15.0, 16)).tolist())
    azimuth_step: float = math.radians(0.4)
    max_range: float = 100.0
    min_range: float = 0.5
    range_noise_sigma: float = 0.01
    mount: Pose6 = Pose6(0.0, 0.0, 1.8, 0.0, 0.0, 0.0)

    def __post_init__(self):
        elev = tuple(float(e) for e in self.elevation_angles)
        object.__setattr__(self, "elevation_angles", elev)
        if len(elev) != self.channels:
            raise ValidationError(f"{self.channels} channels but {len(elev)} elevation angles")
        if not 0 < self.min_range < self.max_range:
            raise ValidationError("need 0 < min_range < max_range")
        if self.range_noise_sigma < 0:
            raise ValidationError("range_noise_sigma must be >= 0")
        if self.azimuth_step <= 0:
            raise ValidationError("azimuth_step must be positive")
        n = round(2 * math.pi / self.azimuth_step)
        if abs(n * self.azimuth_step - 2 * math.pi) > 1e-9:
            raise ValidationError("azimuth_step must divide 2*pi")

    @property
    def n_azimuth(self) -> int:
        return round(2 * math.pi / self.azimuth_step)

    def ray_directions(self) -> np.ndarray:
        """Unit directions in the sensor frame, channel-major then azimuth."""
        elev = np.asarray(self.elevation_angles)[:, None]
        az = (np.arange(self.n_azimuth) * self.azimuth_step)[None, :]
        d = np.stack(
            [np.cos(elev) * np.cos(az), np.cos(elev) * np.sin(az), np.sin(elev) * np.ones_like(az)],
            axis=-1,
        )
        return d.reshape(-1, 3)

    def to_dict(self) -> dict:
        m = self.mount
        return {
            "channels": self.channels,
            "elevation_angles": list(self.elevation_angles),
            "azimuth_step": self.azimuth_step,
            "max_range": self.max_range,
            "min_range": self.min_range,
            "range_noise_sigma": self.range_noise_sigma,
            "mount": [m.x, m.y, m.z, m.roll, m.pitch, m.yaw],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LidarConfig":
        d = dict(d)
        if "mount" in d:
            d["mount"] = Pose6.from_vector(d["mount"])
        if "elevation_angles" in d:
            d["elevation_angles"] = tuple(d["elevation_angles"])
            d.setdefault("channels", len(d["elevation_angles"]))
        elif "channels" in d:
            d["elevation_angles"] = tuple(np.radians(np.linspace(-15.0, 15.0, int(d["channels"]))).tolist())
        return cls(**d)


def _intersect_ground(z0, o, d):
    t = np.full(d.shape[0], np.inf)
    dz = d[:, 2]
    ok = dz != 0
    t[ok] = (z0 - o[ok, 2]) / dz[ok]
    t[t <= _HIT_EPS] = np.inf
    return t


def _intersect_box(box: Box, o, d):
    t_near = np.full(d.shape[0], -np.inf)
    t_far = np.full(d.shape[0], np.inf)
    for k in range(3):
        dk, ok = d[:, k], o[:, k]
        par = dk == 0
        outside = par & ((ok < box.min[k]) | (ok > box.max[k]))
        t_far[outside] = -np.inf
        nz = ~par
        t1 = (box.min[k] - ok[nz]) / dk[nz]
        t2 = (box.max[k] - ok[nz]) / dk[nz]
        t_near[nz] = np.maximum(t_near[nz], np.minimum(t1, t2))
        t_far[nz] = np.minimum(t_far[nz], np.maximum(t1, t2))
    hit = t_far >= t_near
    t = np.where(t_near > _HIT_EPS, t_near, t_far)
    t[~hit | (t <= _HIT_EPS)] = np.inf
    return t


def _intersect_cylinder(cyl: Cylinder, o, d):
    cx, cy, z0 = cyl.center
    z1 = z0 + cyl.height
    r2 = cyl.radius ** 2
    n = d.shape[0]
    best = np.full(n, np.inf)

    # lateral surface
    ox, oy = o[:, 0] - cx, o[:, 1] - cy
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = 2.0 * (ox * d[:, 0] + oy * d[:, 1])
    c = ox ** 2 + oy ** 2 - r2
    disc = b * b - 4.0 * a * c
    ok = (a > 0) & (disc >= 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    safe_a = np.where(ok, a, 1.0)
    for t in ((-b - sq) / (2.0 * safe_a), (-b + sq) / (2.0 * safe_a)):
        z = o[:, 2] + t * d[:, 2]
        good = ok & (t > _HIT_EPS) & (z >= z0) & (z <= z1)
        best = np.where(good & (t < best), t, best)

    # end caps
    dz = d[:, 2]
    nz = dz != 0
    for zc in (z0, z1):
        t = np.full(n, np.inf)
        t[nz] = (zc - o[nz, 2]) / dz[nz]
        px = o[:, 0] + np.where(np.isfinite(t), t, 0.0) * d[:, 0] - cx
        py = o[:, 1] + np.where(np.isfinite(t), t, 0.0) * d[:, 1] - cy
        good = (t > _HIT_EPS) & np.isfinite(t) & (px ** 2 + py ** 2 <= r2)
        best = np.where(good & (t < best), t, best)
    return best


def cast_rays(scene: Scene, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Nearest positive hit distance per ray, ``inf`` where nothing is hit."""
    origins = np.broadcast_to(np.asarray(origins, dtype=float), dirs.shape)
    best = np.full(dirs.shape[0], np.inf)
    if scene.ground_z is not None:
        best = np.minimum(best, _intersect_ground(scene.ground_z, origins, dirs))
    for box in scene.boxes:
        best = np.minimum(best, _intersect_box(box, origins, dirs))
    for cyl in scene.cylinders:
        best = np.minimum(best, _intersect_cylinder(cyl, origins, dirs))
    return best


def ray_cast(scene: Scene, origin, direction) -> float | None:
    d = np.asarray(direction, dtype=float).reshape(1, 3)
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"ray direction must be a unit vector, |d| = {np.linalg.norm(d)!r}")
    o = np.asarray(origin.as_array() if hasattr(origin, "as_array") else origin, dtype=float).reshape(1, 3)
    t = float(cast_rays(scene, o, d)[0])
    return None if math.isinf(t) else t


def simulate_scan(scene: Scene, sensor_pose_world: Pose6, cfg: LidarConfig, seed: int) -> PointCloud:
    """One full revolution, returned in the sensor frame.

    Noise is drawn for every ray (hit or miss) so the random stream does not
    depend on scene content.
    """
    dirs_s = cfg.ray_directions()
    t = pose_to_transform(sensor_pose_world)
    dirs_w = dirs_s @ t[:3, :3].T
    ranges = cast_rays(scene, t[:3, 3], dirs_w)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(ranges.shape[0]) * cfg.range_noise_sigma
    hit = np.isfinite(ranges)
    r = np.where(hit, ranges + noise, np.inf)
    keep = hit & (r >= cfg.min_range) & (r <= cfg.max_range)
    return PointCloud(dirs_s[keep] * r[keep, None], "sensor")
