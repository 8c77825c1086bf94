import json
import re

import numpy as np
import pytest

from avshuttle.control import Route
from avshuttle.errors import ReportIOError
from avshuttle.report import emit_report, load_log, metrics_json, route_overlay_svg, trajectory_csv
from avshuttle.scene import Scene
from avshuttle.sim import ScenarioConfig, SimLog, StepRecord, compute_metrics, run_scenario


def on_route_log():
    """A log that drives exactly along its route."""
    route = Route([(0.0, 0.0), (10.0, 0.0), (10.0, 5.0)])
    recs = [StepRecord(0.1 * k, (float(x), float(y), 0.0), (float(x), float(y), 0.0), 0.0, (10.0, 5.0), 0.0)
            for k, (x, y) in enumerate(route.waypoints)]
    return SimLog(recs, "route-complete", "ground_truth", 0.1, route)


@pytest.fixture(scope="module")
def gt_log():
    xs = np.arange(0.0, 30.0 + 1e-9, 1.0)
    route = Route(np.column_stack([xs, 0.1 * xs]))
    return run_scenario(ScenarioConfig(scene=Scene(), route=route, mode="ground_truth", start_offset=(0.5, 0.0)))


def polyline(svg, name):
    m = re.search(rf'<polyline id="{name}"[^>]* points="([^"]*)"', svg)
    return m.group(1)


def test_coincident_polylines():
    svg = route_overlay_svg(on_route_log().route, on_route_log())
    assert polyline(svg, "route") == polyline(svg, "driven")
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_rerun_identical_bytes(gt_log, tmp_path):
    metrics = compute_metrics(gt_log)
    emit_report(gt_log, metrics, tmp_path)
    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    emit_report(gt_log, metrics, tmp_path)
    second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    assert first == second
    assert {"trajectory.csv", "metrics.json", "overlay.svg", "run.json", "route.csv", "trajectory.png",
            "cross_track.png"} <= set(first)


def test_metrics_round_trip(gt_log):
    m = compute_metrics(gt_log)
    assert json.loads(metrics_json(m)) == m


def test_log_round_trip(gt_log, tmp_path):
    emit_report(gt_log, compute_metrics(gt_log), tmp_path, figures=False)
    back = load_log(tmp_path / "trajectory.csv")
    assert back.records == gt_log.records
    assert back.status == gt_log.status and back.route == gt_log.route
    assert trajectory_csv(back) == (tmp_path / "trajectory.csv").read_text()
    assert compute_metrics(back) == compute_metrics(gt_log)


def test_report_only_leaves_log(gt_log, tmp_path):
    emit_report(gt_log, compute_metrics(gt_log), tmp_path, figures=False)
    before = (tmp_path / "trajectory.csv").read_bytes()
    paths = emit_report(load_log(tmp_path / "trajectory.csv"), compute_metrics(gt_log), tmp_path, figures=False,
                        write_log=False)
    assert "trajectory" not in paths
    assert (tmp_path / "trajectory.csv").read_bytes() == before


def test_io_error_names_path(gt_log, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportIOError) as exc:
        emit_report(gt_log, compute_metrics(gt_log), blocker)
    assert str(blocker) in str(exc.value)
    with pytest.raises(ReportIOError):
        load_log(tmp_path / "missing.csv")
