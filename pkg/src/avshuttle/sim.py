"""Closed-loop scenario runner: lidar, localization, pure pursuit, bicycle.

Per step ``k`` (time ``k * dt``) the true vehicle state is scanned, the pose
is estimated (ndt mode) or copied (ground_truth mode), the controller turns
the *estimate* into a steering command, and the true state is integrated.
Every random stream is derived from the scenario seed, so a config and seed
fix the log exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control import (LOOKAHEAD, Route, VehicleParams, VehicleState, find_goal_point, heading_error,
                      limit_steer_rate, load_route, pure_pursuit_steer, step_bicycle)
from .errors import InvalidArgumentError, ValidationError
from .geometry import Pose6, invert, pose_to_transform, transform_to_pose
from .localization import LocalizationState, LocalizerConfig, localize_scan, to_global, to_map
from .mapping import MappingParams, build_map
from .ndt import NdtGrid, RegistrationParams, load_grid
from .scene import LidarConfig, Scene, load_scene, simulate_scan

MODES = ("ground_truth", "ndt")
STATUSES = ("route-complete", "timeout", "localization-lost")
LOST_AFTER = 10
GOAL_RADIUS = 1.0

# stream tags mixed into SeedSequence so scans, odometry and mapping never share draws
_STREAM_SCAN, _STREAM_MAP_SCAN, _STREAM_ODOM = 0, 1, 2


def _seed(seed: int, stream: int, k: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), stream, int(k)])


@dataclass
class MapDriveParams:
    """Ground-truth mapping drive over the route before the closed-loop run."""

    scan_every: int = 2
    odometry_sigma: tuple = (0.05, math.radians(0.5))  # per-scan translation (m), yaw (rad)
    mapping: MappingParams = field(default_factory=MappingParams)


@dataclass
class ScenarioConfig:
    scene: Scene | str | Path
    route: Route | str | Path
    mode: str = "ndt"
    # NdtGrid, a grid JSON / map directory path, "build-from-drive", or None
    map_source: object = None
    lidar: LidarConfig = field(default_factory=LidarConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    dt: float = 0.1
    duration: float | None = None  # timeout in seconds; None scales with route length
    seed: int = 0
    lookahead: float = LOOKAHEAD
    registration: RegistrationParams = field(default_factory=RegistrationParams)
    scan_leaf: float | None = 0.4
    map_drive: MapDriveParams = field(default_factory=MapDriveParams)
    # lateral offset (m, left positive) and heading offset (rad) at the start
    start_offset: tuple = (0.0, 0.0)
    base_dir: Path | None = None

    def resolve_path(self, p) -> Path:
        p = Path(p)
        if not p.is_absolute() and self.base_dir is not None:
            p = Path(self.base_dir) / p
        return p


@dataclass(frozen=True)
class StepRecord:
    t: float
    true_pose: tuple  # (x, y, yaw)
    est_pose: tuple
    steer: float
    goal: tuple
    cte: float
    score: float | None = None
    converged: bool | None = None
    degraded: bool = False


@dataclass
class SimLog:
    records: list
    status: str
    mode: str = "ground_truth"
    dt: float = 0.1
    route: Route | None = None
    map_diagnostics: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)


def _opt(d, key, conv, default):
    return conv(d[key]) if d.get(key) is not None else default


def load_config(path) -> ScenarioConfig:
    """Read a JSON scenario; relative paths resolve against the file's directory."""
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(d, base_dir=path.parent)


def config_from_dict(d: dict, base_dir=None) -> ScenarioConfig:
    if "scene" not in d or "route" not in d:
        raise ValidationError("scenario needs 'scene' and 'route'")
    known = {"scene", "route", "mode", "map", "lidar", "vehicle", "dt", "duration", "seed", "lookahead",
             "scan_leaf", "map_drive", "start_offset"}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ValidationError(f"unknown scenario keys: {', '.join(unknown)}")
    md = d.get("map_drive") or {}
    drive = MapDriveParams(
        scan_every=int(md.get("scan_every", 2)),
        odometry_sigma=tuple(md.get("odometry_sigma", MapDriveParams().odometry_sigma)),
    )
    try:
        cfg = ScenarioConfig(
            scene=d["scene"],
            route=d["route"],
            mode=d.get("mode", "ndt"),
            map_source=d.get("map"),
            lidar=LidarConfig.from_dict(d.get("lidar") or {}),
            vehicle=VehicleParams.from_dict(d.get("vehicle") or {}),
            dt=float(d.get("dt", 0.1)),
            duration=_opt(d, "duration", float, None),
            seed=int(d.get("seed", 0)),
            lookahead=float(d.get("lookahead", LOOKAHEAD)),
            scan_leaf=_opt(d, "scan_leaf", float, None) if "scan_leaf" in d else 0.4,
            map_drive=drive,
            start_offset=tuple(d.get("start_offset", (0.0, 0.0))),
            base_dir=None if base_dir is None else Path(base_dir),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad scenario value: {exc}") from None
    return cfg


def _load_scene(cfg: ScenarioConfig) -> Scene:
    if isinstance(cfg.scene, Scene):
        return cfg.scene
    p = cfg.resolve_path(cfg.scene)
    if not p.is_file():
        raise ValidationError(f"scene file {p} does not exist")
    return load_scene(p)


def _load_route(cfg: ScenarioConfig) -> Route:
    if isinstance(cfg.route, Route):
        return cfg.route
    p = cfg.resolve_path(cfg.route)
    if not p.is_file():
        raise ValidationError(f"route file {p} does not exist")
    return load_route(p)


def validate(cfg: ScenarioConfig):
    """Check the config and load its inputs; raises ValidationError before any stepping."""
    if cfg.mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if not 0 < cfg.dt <= 0.1:
        raise ValidationError(f"dt must be in (0, 0.1], got {cfg.dt}")
    if cfg.duration is not None and not cfg.duration > 0:
        raise ValidationError("duration must be positive")
    if not cfg.lookahead > 0:
        raise ValidationError("lookahead must be positive")
    if cfg.map_drive.scan_every < 1:
        raise ValidationError("map_drive.scan_every must be >= 1")
    if not isinstance(cfg.vehicle, VehicleParams):
        raise ValidationError("vehicle must be VehicleParams")
    scene, route = _load_scene(cfg), _load_route(cfg)
    src = cfg.map_source
    if cfg.mode == "ndt":
        if src is None:
            raise ValidationError("ndt mode needs a map: a prebuilt grid path or 'build-from-drive'")
        if not isinstance(src, NdtGrid) and src != "build-from-drive":
            p = cfg.resolve_path(src)
            if p.is_dir():
                p = p / "grid.json"
            if not p.is_file():
                raise ValidationError(f"map grid {p} does not exist")
    return scene, route


def _vehicle_pose(state: VehicleState) -> Pose6:
    return Pose6(state.x, state.y, 0.0, 0.0, 0.0, state.yaw)


def start_state(route: Route, offset=(0.0, 0.0)) -> VehicleState:
    p0, p1 = route.waypoints[0], route.waypoints[1]
    yaw = math.atan2(p1[1] - p0[1], p1[0] - p0[0])
    lat, dyaw = offset
    return VehicleState(p0[0] - lat * math.sin(yaw), p0[1] + lat * math.cos(yaw), yaw + dyaw, 0.0)


def _default_duration(route: Route, params: VehicleParams) -> float:
    return 2.0 * route.length / params.cruise_speed + 10.0


def _window(params: VehicleParams, dt: float, lookahead: float) -> float:
    return max(10.0, 3.0 * params.cruise_speed * dt + lookahead)


def drive_for_map(scene: Scene, route: Route, cfg: ScenarioConfig):
    """Ground-truth pure pursuit drive collecting scans and noisy odometry.

    Returns ``(MapBuild, anchor)`` where ``anchor`` is the world pose of the
    first mapping scan's sensor, i.e. the map origin in the global frame.
    """
    drive = cfg.map_drive
    t_lidar = pose_to_transform(cfg.lidar.mount)
    scans, sensor_poses = [], []
    state, s_hint = start_state(route), 0.0
    window = _window(cfg.vehicle, cfg.dt, cfg.lookahead)
    n_max = int(math.ceil(_default_duration(route, cfg.vehicle) / cfg.dt))
    for k in range(n_max):
        s_hint = route.project(state.position, s_hint, window)[0]
        if k % drive.scan_every == 0:
            sensor = transform_to_pose(pose_to_transform(_vehicle_pose(state)) @ t_lidar)
            scans.append(simulate_scan(scene, sensor, cfg.lidar, _seed(cfg.seed, _STREAM_MAP_SCAN, k)))
            sensor_poses.append(sensor)
        if _arrived(route, state, s_hint):
            break
        goal = find_goal_point(route, state.position, cfg.lookahead, s_hint, window)
        steer = pure_pursuit_steer(heading_error(state.x, state.y, state.yaw, goal), cfg.vehicle, cfg.lookahead)
        state = step_bicycle(state, steer, cfg.vehicle, cfg.dt)

    sig_t, sig_r = drive.odometry_sigma
    odometry = [Pose6()]
    for i in range(1, len(sensor_poses)):
        rel = invert(pose_to_transform(sensor_poses[i - 1])) @ pose_to_transform(sensor_poses[i])
        rng = np.random.default_rng(_seed(cfg.seed, _STREAM_ODOM, i))
        n = rng.standard_normal(3)
        noise = Pose6(sig_t * n[0], sig_t * n[1], 0.0, 0.0, 0.0, sig_r * n[2])
        odometry.append(transform_to_pose(rel @ pose_to_transform(noise)))
    params = MappingParams(**{**drive.mapping.__dict__, "registration": cfg.registration})
    built = build_map(scans, params, odometry)
    return built, sensor_poses[0]


def _arrived(route: Route, state: VehicleState, s: float) -> bool:
    end = route.waypoints[-1]
    near_end = s >= route.length - GOAL_RADIUS - 1e-9
    return near_end and math.hypot(state.x - end[0], state.y - end[1]) < GOAL_RADIUS


def resolve_map(cfg: ScenarioConfig, scene: Scene, route: Route):
    """Return ``(grid, anchor, MapBuild or None)`` for ndt mode."""
    src = cfg.map_source
    if isinstance(src, NdtGrid):
        return src, Pose6(), None
    if src == "build-from-drive":
        built, anchor = drive_for_map(scene, route, cfg)
        return built.grid, anchor, built
    p = cfg.resolve_path(src)
    directory = p if p.is_dir() else p.parent
    grid = load_grid(p / "grid.json" if p.is_dir() else p)
    anchor = Pose6()
    meta = directory / "map.json"
    if meta.is_file():
        anchor = Pose6.from_vector(json.loads(meta.read_text())["anchor"])
    return grid, anchor, None


def run_scenario(cfg: ScenarioConfig, grid: NdtGrid | None = None, anchor: Pose6 | None = None) -> SimLog:
    """Run the closed loop. ``grid``/``anchor`` bypass ``cfg.map_source`` when given."""
    scene, route = validate(cfg)
    params = cfg.vehicle
    diagnostics = []
    loc_cfg = None
    if cfg.mode == "ndt":
        if grid is None:
            grid, anchor, built = resolve_map(cfg, scene, route)
            if built is not None:
                diagnostics = list(built.diagnostics)
        loc_cfg = LocalizerConfig(cfg.lidar.mount, anchor or Pose6(), cfg.registration, cfg.scan_leaf)

    duration = cfg.duration if cfg.duration is not None else _default_duration(route, params)
    n_max = max(1, int(math.floor(duration / cfg.dt + 1e-9)))
    window = _window(params, cfg.dt, cfg.lookahead)
    t_lidar = pose_to_transform(cfg.lidar.mount)

    state = start_state(route, cfg.start_offset)
    loc_state = None
    if loc_cfg is not None:
        # the initial pose is known (the shuttle starts at its depot)
        loc_state = LocalizationState(to_map(_vehicle_pose(state), loc_cfg), (params.cruise_speed, 0.0))

    records = []
    s_true = route.project(state.position)[0] if cfg.start_offset == (0.0, 0.0) else 0.0
    s_est = s_true
    steer_prev = 0.0
    lost_run = 0
    status = "timeout"
    for k in range(n_max):
        t = k * cfg.dt
        s_true, _, _, cte = route.project(state.position, s_true, window)
        score = converged = None
        degraded = False
        if loc_cfg is not None:
            sensor = transform_to_pose(pose_to_transform(_vehicle_pose(state)) @ t_lidar)
            scan = simulate_scan(scene, sensor, cfg.lidar, _seed(cfg.seed, _STREAM_SCAN, k))
            pose_map, loc_state = localize_scan(grid, scan, loc_state, loc_cfg, cfg.dt if k else 0.0)
            est = to_global(pose_map, loc_cfg)
            est_xy_yaw = (est.x, est.y, est.yaw)
            res = loc_state.last_result
            score = None if res is None else res.score
            converged = res is not None and res.converged
            degraded = loc_state.degraded
        else:
            est_xy_yaw = (state.x, state.y, state.yaw)

        # controller side: only the estimate is visible from here on
        ex, ey, eyaw = est_xy_yaw
        s_est = route.project((ex, ey), s_est, window)[0]
        goal = find_goal_point(route, (ex, ey), cfg.lookahead, s_est, window)
        steer = pure_pursuit_steer(heading_error(ex, ey, eyaw, goal), params, cfg.lookahead)
        steer = limit_steer_rate(steer_prev, steer, params, cfg.dt)
        records.append(StepRecord(t, (state.x, state.y, state.yaw), est_xy_yaw, steer,
                                  (float(goal[0]), float(goal[1])), cte, score, converged, degraded))

        lost_run = lost_run + 1 if degraded else 0
        if lost_run >= LOST_AFTER:
            status = "localization-lost"
            break
        if _arrived(route, state, s_true):
            status = "route-complete"
            break
        steer_prev = steer
        state = step_bicycle(state, steer, params, cfg.dt)
    return SimLog(records, status, cfg.mode, cfg.dt, route, diagnostics)


def compute_metrics(log: SimLog) -> dict:
    if log is None or len(log.records) == 0:
        raise InvalidArgumentError("cannot compute metrics of an empty log")
    cte = np.array([r.cte for r in log.records])
    true_xy = np.array([r.true_pose[:2] for r in log.records])
    est_xy = np.array([r.est_pose[:2] for r in log.records])
    loc_err = np.hypot(*(est_xy - true_xy).T)
    dist = float(np.hypot(*np.diff(true_xy, axis=0).T).sum()) if len(true_xy) > 1 else 0.0
    return {
        "max_abs_cte": float(np.max(np.abs(cte))),
        "rms_cte": float(np.sqrt(np.mean(cte ** 2))),
        "mean_localization_error": float(loc_err.mean()) if log.mode == "ndt" else 0.0,
        "max_localization_error": float(loc_err.max()) if log.mode == "ndt" else 0.0,
        "degraded_frames": int(sum(bool(r.degraded) for r in log.records)),
        "steps": len(log.records),
        "status": log.status,
        "distance_traveled": dist,
    }


def concat_logs(a: SimLog, b: SimLog) -> SimLog:
    """Join two logs, shifting ``b`` in time; the later status wins."""
    if not a.records:
        return b
    shift = a.records[-1].t + a.dt
    shifted = [StepRecord(r.t + shift, r.true_pose, r.est_pose, r.steer, r.goal, r.cte, r.score, r.converged,
                          r.degraded) for r in b.records]
    return SimLog(a.records + shifted, b.status, a.mode, a.dt, a.route, a.map_diagnostics + b.map_diagnostics)


def localize_drive(scene: Scene, route: Route, grid: NdtGrid, anchor: Pose6, cfg: ScenarioConfig):
    """Open-loop localization test: ground-truth pure pursuit, NDT estimate logged only.

    Returns rows ``(t, est (x, y, yaw), true (x, y, yaw), score, converged)``.
    """
    params = cfg.vehicle
    loc_cfg = LocalizerConfig(cfg.lidar.mount, anchor, cfg.registration, cfg.scan_leaf)
    t_lidar = pose_to_transform(cfg.lidar.mount)
    window = _window(params, cfg.dt, cfg.lookahead)
    duration = cfg.duration if cfg.duration is not None else _default_duration(route, params)
    state, s_hint = start_state(route), 0.0
    loc_state = LocalizationState(to_map(_vehicle_pose(state), loc_cfg), (params.cruise_speed, 0.0))
    rows = []
    for k in range(max(1, int(math.floor(duration / cfg.dt + 1e-9)))):
        s_hint = route.project(state.position, s_hint, window)[0]
        sensor = transform_to_pose(pose_to_transform(_vehicle_pose(state)) @ t_lidar)
        scan = simulate_scan(scene, sensor, cfg.lidar, _seed(cfg.seed, _STREAM_SCAN, k))
        pose_map, loc_state = localize_scan(grid, scan, loc_state, loc_cfg, cfg.dt if k else 0.0)
        est = to_global(pose_map, loc_cfg)
        res = loc_state.last_result
        rows.append((k * cfg.dt, (est.x, est.y, est.yaw), (state.x, state.y, state.yaw),
                     None if res is None else res.score, not loc_state.degraded))
        if _arrived(route, state, s_hint):
            break
        goal = find_goal_point(route, state.position, cfg.lookahead, s_hint, window)
        steer = pure_pursuit_steer(heading_error(state.x, state.y, state.yaw, goal), params, cfg.lookahead)
        state = step_bicycle(state, steer, params, cfg.dt)
    return rows


def write_map_dir(built, anchor: Pose6, route: Route, out_dir) -> dict:
    """Persist a built map: grid, downsampled points, route and poses/anchor metadata."""
    from .mapping import save_map_points
    from .ndt import save_grid
    from .control import save_route

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_grid(built.grid, out / "grid.json")
    save_map_points(built.map_cloud, out / "map_points.csv")
    save_route(route, out / "route.csv")
    meta = {
        "anchor": anchor.as_vector().tolist(),
        "keyframes": [[i, p.as_vector().tolist()] for i, p in built.keyframes],
        "scan_poses": [None if p is None else p.as_vector().tolist() for p in built.poses],
        "diagnostics": [list(d) for d in built.diagnostics],
        "leaf_size": built.params.leaf_size,
        "cell_size": built.params.cell_size,
    }
    (out / "map.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return {name: out / name for name in ("grid.json", "map_points.csv", "route.csv", "map.json")}
