"""Command line interface: ``shuttle-sim <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import demo
from .control import load_route, save_route
from .errors import InvalidArgumentError, ShuttleError, ValidationError
from .report import emit_report, load_log, localization_csv, metrics_json
from .scene import load_scene, save_scene
from .sim import (MapDriveParams, ScenarioConfig, compute_metrics, drive_for_map, load_config,
                  localize_drive, resolve_map, run_scenario, validate, write_map_dir)


def _origin(text: str):
    from .osm import EnuOrigin

    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise InvalidArgumentError(f"--origin must be 'lat,lon[,elevation]', got {text!r}") from None
    if len(parts) not in (2, 3):
        raise InvalidArgumentError(f"--origin must be 'lat,lon[,elevation]', got {text!r}")
    return EnuOrigin(*parts)


def cmd_route(args) -> int:
    from .osm import buildings_to_scene, extract_route, load_osm

    doc = load_osm(args.osm)
    origin = _origin(args.origin)
    route = extract_route(doc, args.way, origin, args.spacing)
    save_route(route, args.output)
    if args.scene_out:
        save_scene(buildings_to_scene(doc, origin), args.scene_out)
    print(f"route: {len(route)} waypoints, {route.length:.3f} m -> {args.output}")
    return 0


def _existing(path, what):
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"{what} file {p} does not exist")
    return p


def cmd_map(args) -> int:
    scene = load_scene(_existing(args.scene, "scene"))
    route = load_route(_existing(args.route, "route"))
    cfg = ScenarioConfig(scene=scene, route=route, mode="ground_truth", dt=args.dt, seed=args.seed,
                         map_drive=MapDriveParams(scan_every=args.scan_every))
    validate(cfg)
    built, anchor = drive_for_map(scene, route, cfg)
    write_map_dir(built, anchor, route, args.out)
    print(f"map: {len(built.keyframes)} keyframes from {len(built.poses)} scans, "
          f"{len(built.grid)} cells -> {args.out}")
    for i, why in built.diagnostics:
        print(f"  skipped scan {i}: {why}")
    return 0


def cmd_localize(args) -> int:
    scene = load_scene(_existing(args.scene, "scene"))
    map_dir = Path(args.map)
    route_path = args.route or map_dir / "route.csv"
    route = load_route(_existing(route_path, "route"))
    cfg = ScenarioConfig(scene=scene, route=route, mode="ndt", map_source=map_dir, dt=args.dt, seed=args.seed)
    validate(cfg)
    grid, anchor, _ = resolve_map(cfg, scene, route)
    rows = localize_drive(scene, route, grid, anchor, cfg)
    Path(args.log).parent.mkdir(parents=True, exist_ok=True)
    Path(args.log).write_text(localization_csv(rows))
    errs = [((e[0] - t[0]) ** 2 + (e[1] - t[1]) ** 2) ** 0.5 for _, e, t, _, _ in rows]
    lost = sum(not c for *_, c in rows)
    print(f"localize: {len(rows)} frames, mean error {sum(errs) / len(errs):.4f} m, "
          f"{lost} degraded -> {args.log}")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    log = run_scenario(cfg)
    metrics = compute_metrics(log)
    emit_report(log, metrics, args.out, figures=not args.no_figures)
    sys.stdout.write(metrics_json(metrics))
    return 0 if log.status == "route-complete" else 10


def cmd_report(args) -> int:
    log = load_log(args.log)
    if args.route:
        log.route = load_route(_existing(args.route, "route"))
    metrics = compute_metrics(log)
    out = Path(args.out) if args.out else Path(args.log).parent
    emit_report(log, metrics, out, figures=not args.no_figures, write_log=False)
    sys.stdout.write(metrics_json(metrics))
    return 0


def cmd_demo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scene(demo.demo_scene(), out / "scene.json")
    save_route(demo.demo_route(), out / "route.csv")
    scenario = {"scene": "scene.json", "route": "route.csv", "mode": "ndt", "map": "build-from-drive",
                "dt": 0.1, "seed": args.seed}
    (out / "scenario.json").write_text(json.dumps(scenario, indent=2, sort_keys=True) + "\n")
    print(f"demo inputs written to {out}")
    if args.run:
        return cmd_simulate(argparse.Namespace(config=out / "scenario.json", out=out / "results", seed=None,
                                               no_figures=args.no_figures))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shuttle-sim", description="Headless shuttle pre-deployment test harness.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("route", help="extract a route CSV from OSM XML")
    r.add_argument("osm")
    r.add_argument("--way", required=True, help="'id:1,2', 'key=value' or 'key'")
    r.add_argument("--origin", required=True, help="lat,lon[,elevation] of the local frame origin")
    r.add_argument("--spacing", type=float, default=1.0)
    r.add_argument("-o", "--output", required=True)
    r.add_argument("--scene-out", help="also write building footprints as a scene JSON")
    r.set_defaults(func=cmd_route)

    m = sub.add_parser("map", help="drive the route on ground truth and build an NDT map")
    m.add_argument("--scene", required=True)
    m.add_argument("--route", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--scan-every", type=int, default=2, help="steps between mapping scans")
    m.add_argument("--dt", type=float, default=0.1)
    m.set_defaults(func=cmd_map)

    lo = sub.add_parser("localize", help="open-loop localization along the route against a map")
    lo.add_argument("--map", required=True, help="directory written by 'map'")
    lo.add_argument("--scene", required=True)
    lo.add_argument("--log", required=True)
    lo.add_argument("--route", help="defaults to the route stored with the map")
    lo.add_argument("--seed", type=int, default=0)
    lo.add_argument("--dt", type=float, default=0.1)
    lo.set_defaults(func=cmd_localize)

    s = sub.add_parser("simulate", help="run a closed-loop scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, help="override the scenario seed")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_simulate)

    rp = sub.add_parser("report", help="metrics, SVG overlay and figures from a trajectory log")
    rp.add_argument("--log", required=True)
    rp.add_argument("--route", help="reference route (defaults to route.csv beside the log)")
    rp.add_argument("--out", help="output directory (defaults to the log's directory)")
    rp.add_argument("--no-figures", action="store_true")
    rp.set_defaults(func=cmd_report)

    d = sub.add_parser("demo", help="write the canonical demo scene, route and scenario")
    d.add_argument("--out", required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--run", action="store_true", help="also run the scenario into OUT/results")
    d.add_argument("--no-figures", action="store_true")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ShuttleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 9


if __name__ == "__main__":
    sys.exit(main())
