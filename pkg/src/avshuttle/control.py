"""Kinematic single-track vehicle, routes, and the pure pursuit steering law."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError, ValidationError
from .geometry import normalize_angle

MPH_25 = 25 * 0.44704  # 11.176 m/s, the shuttle speed ceiling
LOOKAHEAD = 6.0


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    speed: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))
        if self.speed < 0:
            raise InvalidArgumentError(f"speed must be non-negative, got {self.speed}")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 3.0
    max_steer: float = 0.5
    cruise_speed: float = MPH_25
    steer_rate_limit: float = math.inf

    def __post_init__(self):
        if not self.wheelbase > 0:
            raise ValidationError("wheelbase must be positive")
        if not 0 < self.max_steer < math.pi / 2:
            raise ValidationError("max_steer must be in (0, pi/2)")
        if not 0 < self.cruise_speed <= MPH_25 + 1e-12:
            raise ValidationError(f"cruise_speed must be in (0, {MPH_25}] m/s, got {self.cruise_speed}")
        if not self.steer_rate_limit > 0:
            raise ValidationError("steer_rate_limit must be positive")

    def to_dict(self) -> dict:
        d = {"wheelbase": self.wheelbase, "max_steer": self.max_steer, "cruise_speed": self.cruise_speed}
        if math.isfinite(self.steer_rate_limit):
            d["steer_rate_limit"] = self.steer_rate_limit
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleParams":
        d = dict(d)
        if d.get("steer_rate_limit") is None:
            d.pop("steer_rate_limit", None)
        return cls(**d)


class Route:
    """Ordered 2D waypoints with cumulative arclength ``s``."""

    def __init__(self, waypoints):
        w = np.asarray(waypoints, dtype=float)
        if w.ndim != 2 or w.shape[1] != 2 or len(w) < 2:
            raise InvalidArgumentError("a route needs at least two (x, y) waypoints")
        if not np.all(np.isfinite(w)):
            raise InvalidArgumentError("route waypoints must be finite")
        seg = np.hypot(*np.diff(w, axis=0).T)
        if np.any(seg <= 0):
            raise InvalidArgumentError("consecutive route waypoints must be distinct")
        self.waypoints = w
        self.s = np.concatenate([[0.0], np.cumsum(seg)])
        self._seg_len = seg
        self._seg_dir = np.diff(w, axis=0) / seg[:, None]

    def __len__(self):
        return len(self.waypoints)

    def __eq__(self, other):
        return isinstance(other, Route) and np.array_equal(self.waypoints, other.waypoints)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def point_at(self, s: float) -> np.ndarray:
        if s >= self.s[-1]:
            return self.waypoints[-1].copy()
        if s <= 0:
            return self.waypoints[0].copy()
        i = int(np.searchsorted(self.s, s, side="right") - 1)
        return self.waypoints[i] + (s - self.s[i]) * self._seg_dir[i]

    def project(self, position, s_hint: float | None = None, window: float | None = None):
        """Closest point on the route by perpendicular projection onto segments.

        With ``s_hint`` and ``window`` only segments overlapping
        ``[s_hint - window, s_hint + window]`` are considered, which keeps
        progress monotone on loops and self-intersecting routes.
        Returns ``(s, closest_point, segment_index, signed_offset)``; the offset
        is positive to the left of the direction of travel.
        """
        p = np.asarray(position, dtype=float)
        a = self.waypoints[:-1]
        rel = p - a
        along = np.clip(np.einsum("ij,ij->i", rel, self._seg_dir), 0.0, self._seg_len)
        foot = a + along[:, None] * self._seg_dir
        dist = np.hypot(*(p - foot).T)
        if s_hint is not None and window is not None:
            lo, hi = s_hint - window, s_hint + window
            outside = (self.s[1:] < lo) | (self.s[:-1] > hi)
            if not np.all(outside):
                dist = np.where(outside, np.inf, dist)
        i = int(np.argmin(dist))
        d = self._seg_dir[i]
        cross = d[0] * rel[i, 1] - d[1] * rel[i, 0]
        sign = 1.0 if cross >= 0 else -1.0
        return float(self.s[i] + along[i]), foot[i], i, sign * float(dist[i])


def load_route(path) -> Route:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise ValidationError(f"{path}: bad route row {row!r}")
                # header line
    return Route(rows)


def save_route(route: Route, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("x,y\n")
        for x, y in route.waypoints:
            fh.write(f"{float(x)!r},{float(y)!r}\n")


def step_bicycle(state: VehicleState, steer: float, params: VehicleParams, dt: float) -> VehicleState:
    """Forward-Euler kinematic bicycle step at the cruise speed (rear-axle reference)."""
    if not 0 < dt <= 0.1:
        raise InvalidArgumentError(f"dt must be in (0, 0.1], got {dt}")
    delta = max(-params.max_steer, min(params.max_steer, steer))
    v = params.cruise_speed
    return VehicleState(
        x=state.x + v * math.cos(state.yaw) * dt,
        y=state.y + v * math.sin(state.yaw) * dt,
        yaw=state.yaw + v / params.wheelbase * math.tan(delta) * dt,
        speed=v,
    )


def find_goal_point(route: Route, position, l_d: float = LOOKAHEAD, s_hint: float | None = None,
                    window: float | None = None) -> np.ndarray:
    """Route point ``l_d`` meters of arclength past the vehicle's projection.

    Clamped to the final waypoint at the end of the route.
    """
    if route is None or len(route) == 0:
        raise InvalidArgumentError("empty route")
    if not l_d > 0:
        raise InvalidArgumentError("lookahead must be positive")
    s, _, _, _ = route.project(position, s_hint, window)
    return route.point_at(s + l_d)


def heading_error(x: float, y: float, yaw: float, goal) -> float:
    """Angle from the vehicle heading to the bearing of ``goal``, in (-pi, pi]."""
    return normalize_angle(math.atan2(goal[1] - y, goal[0] - x) - yaw)


def pure_pursuit_steer(e: float, params: VehicleParams, l_d: float = LOOKAHEAD) -> float:
    if not l_d > 0:
        raise InvalidArgumentError("lookahead must be positive")
    delta = math.atan(2.0 * params.wheelbase * math.sin(e) / l_d)
    return max(-params.max_steer, min(params.max_steer, delta))


def cross_track_error(route: Route, position, s_hint: float | None = None, window: float | None = None) -> float:
    """Signed distance to the nearest route segment, positive to the left.

    Past either end the distance is to the end waypoint, not to the
    extension of the end segment.
    """
    return route.project(position, s_hint, window)[3]


def limit_steer_rate(previous: float, command: float, params: VehicleParams, dt: float) -> float:
    if math.isinf(params.steer_rate_limit):
        return command
    max_delta = params.steer_rate_limit * dt
    return previous + max(-max_delta, min(max_delta, command - previous))


def with_speed(state: VehicleState, speed: float) -> VehicleState:
    return replace(state, speed=speed)
