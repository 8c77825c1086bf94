"""Run artifacts: trajectory CSV, metrics/run JSON and an SVG route overlay."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .control import Route, load_route
from .errors import InvalidArgumentError, ReportIOError
from .sim import SimLog, StepRecord

TRAJECTORY_COLUMNS = ("t", "true_x", "true_y", "true_yaw", "est_x", "est_y", "est_yaw", "steer",
                      "goal_x", "goal_y", "cte", "score", "converged", "degraded")
LOCALIZATION_COLUMNS = ("t", "est_x", "est_y", "est_yaw", "true_x", "true_y", "true_yaw", "score", "converged")


def _f(v) -> str:
    return "" if v is None else repr(float(v))


def _b(v) -> str:
    return "" if v is None else str(int(bool(v)))


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(path, exc.strerror or str(exc)) from None


def trajectory_csv(log: SimLog) -> str:
    rows = [",".join(TRAJECTORY_COLUMNS)]
    for r in log.records:
        rows.append(",".join([
            _f(r.t), *map(_f, r.true_pose), *map(_f, r.est_pose), _f(r.steer), *map(_f, r.goal), _f(r.cte),
            _f(r.score), _b(r.converged), _b(r.degraded),
        ]))
    return "\n".join(rows) + "\n"


def localization_csv(records) -> str:
    """Rows of ``(t, est, true, score, converged)`` in the localization log layout."""
    rows = [",".join(LOCALIZATION_COLUMNS)]
    for t, est, true, score, conv in records:
        rows.append(",".join([_f(t), *map(_f, est), *map(_f, true), _f(score), _b(conv)]))
    return "\n".join(rows) + "\n"


def route_csv(route: Route) -> str:
    return "x,y\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in route.waypoints)


def metrics_json(metrics: dict) -> str:
    return json.dumps(metrics, indent=2, sort_keys=True) + "\n"


def _opt_float(s):
    return None if s == "" else float(s)


def _opt_bool(s):
    return None if s == "" else s == "1"


def load_log(path) -> SimLog:
    """Read a trajectory CSV, plus ``run.json`` and ``route.csv`` when they sit beside it."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != TRAJECTORY_COLUMNS:
                raise InvalidArgumentError(f"{path}: not a trajectory log (header {reader.fieldnames})")
            records = [
                StepRecord(
                    float(row["t"]),
                    (float(row["true_x"]), float(row["true_y"]), float(row["true_yaw"])),
                    (float(row["est_x"]), float(row["est_y"]), float(row["est_yaw"])),
                    float(row["steer"]),
                    (float(row["goal_x"]), float(row["goal_y"])),
                    float(row["cte"]),
                    _opt_float(row["score"]),
                    _opt_bool(row["converged"]),
                    row["degraded"] == "1",
                )
                for row in reader
            ]
    except OSError as exc:
        raise ReportIOError(path, exc.strerror or str(exc)) from None
    run = {}
    if (path.parent / "run.json").is_file():
        run = json.loads((path.parent / "run.json").read_text())
    route = load_route(path.parent / "route.csv") if (path.parent / "route.csv").is_file() else None
    diagnostics = [tuple(d) for d in run.get("map_diagnostics", [])]
    return SimLog(records, run.get("status", "unknown"), run.get("mode", "ndt"), run.get("dt", 0.1), route,
                  diagnostics)


def route_overlay_svg(route: Route | None, log: SimLog, size: int = 800, margin: float = 5.0) -> str:
    """Reference route (red) against the driven path (blue) in world coordinates."""
    driven = np.array([r.true_pose[:2] for r in log.records]) if log.records else np.zeros((0, 2))
    ref = route.waypoints if route is not None else np.zeros((0, 2))
    allpts = np.vstack([p for p in (ref, driven) if len(p)]) if (len(ref) or len(driven)) else np.zeros((1, 2))
    lo, hi = allpts.min(axis=0) - margin, allpts.max(axis=0) + margin
    span = hi - lo
    scale = size / max(span[0], span[1], 1e-9)
    w, h = span * scale

    def pts(a):
        # flip y so north is up
        return " ".join(f"{(x - lo[0]) * scale:.3f},{(hi[1] - y) * scale:.3f}" for x, y in a)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0f}" height="{h:.0f}" '
        f'viewBox="0 0 {w:.3f} {h:.3f}">',
        f'<rect width="{w:.3f}" height="{h:.3f}" fill="white"/>',
    ]
    if len(ref):
        lines.append(f'<polyline id="route" fill="none" stroke="red" stroke-width="3" points="{pts(ref)}"/>')
    if len(driven):
        lines.append(f'<polyline id="driven" fill="none" stroke="blue" stroke-width="1.5" points="{pts(driven)}"/>')
    bar = 10.0 ** math.floor(math.log10(max(span[0] / 4, 1e-9)))
    lines.append(f'<line x1="10" y1="{h - 10:.3f}" x2="{10 + bar * scale:.3f}" y2="{h - 10:.3f}" '
                 'stroke="black" stroke-width="2"/>')
    lines.append(f'<text x="10" y="{h - 15:.3f}" font-size="12" font-family="monospace">{bar:g} m</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_report(log: SimLog, metrics: dict, out_dir, figures: bool = True, write_log: bool = True) -> dict:
    """Write the run artifacts into ``out_dir``; returns name -> path.

    With ``write_log=False`` only the derived files (metrics, overlay,
    figures) are written, leaving an existing trajectory untouched.
    """
    out = Path(out_dir)
    if out.exists() and not out.is_dir():
        raise ReportIOError(out, "not a directory")
    paths = {"metrics": out / "metrics.json", "overlay": out / "overlay.svg"}
    _write(paths["metrics"], metrics_json(metrics))
    _write(paths["overlay"], route_overlay_svg(log.route, log))
    if write_log:
        paths["trajectory"] = out / "trajectory.csv"
        paths["run"] = out / "run.json"
        _write(paths["trajectory"], trajectory_csv(log))
        run = {"status": log.status, "mode": log.mode, "dt": log.dt, "steps": len(log.records),
               "map_diagnostics": [list(d) for d in log.map_diagnostics]}
        _write(paths["run"], json.dumps(run, indent=2, sort_keys=True) + "\n")
        if log.route is not None:
            paths["route"] = out / "route.csv"
            _write(paths["route"], route_csv(log.route))
    if figures:
        from .plotting import save_figures

        paths.update(save_figures(log, out))
    return paths
