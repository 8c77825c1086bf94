import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from avshuttle.cli import main
from avshuttle.control import Route, save_route
from avshuttle.demo import corridor_scene
from avshuttle.osm import fixture_path
from avshuttle.scene import save_scene


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def write_inputs(d: Path):
    d.mkdir(parents=True, exist_ok=True)
    save_scene(corridor_scene(), d / "scene.json")
    xs = np.arange(0.0, 16.0 + 1e-9, 1.0)
    save_route(Route(np.column_stack([xs, np.zeros_like(xs)])), d / "route.csv")


def run_all(d: Path) -> dict:
    """Every subcommand on small inputs; returns name -> exit code."""
    write_inputs(d / "in")
    codes = {}
    codes["route"] = main(["route", str(fixture_path()), "--way", "highway=service", "--origin", "40,-83",
                           "--spacing", "2", "-o", str(d / "osm_route.csv"), "--scene-out", str(d / "osm_scene.json")])
    codes["map"] = main(["map", "--scene", str(d / "in/scene.json"), "--route", str(d / "in/route.csv"),
                         "--out", str(d / "map"), "--seed", "3"])
    codes["localize"] = main(["localize", "--map", str(d / "map"), "--scene", str(d / "in/scene.json"),
                              "--log", str(d / "loc.csv"), "--seed", "3"])
    (d / "in/scenario.json").write_text(json.dumps({
        "scene": "scene.json", "route": "route.csv", "mode": "ndt", "map": "../map", "seed": 3,
        "start_offset": [0.3, 0.0]}))
    codes["simulate"] = main(["simulate", "--config", str(d / "in/scenario.json"), "--out", str(d / "sim")])
    codes["report"] = main(["report", "--log", str(d / "sim/trajectory.csv"), "--out", str(d / "report")])
    codes["demo"] = main(["demo", "--out", str(d / "demo")])
    return codes


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("a"), tmp_path_factory.mktemp("b")
    return (run_all(a), tree_bytes(a)), (run_all(b), tree_bytes(b))


def test_commands_succeed(two_runs):
    (codes, files), _ = two_runs
    assert codes == dict.fromkeys(codes, 0)
    for name in ("osm_route.csv", "map/grid.json", "map/map.json", "loc.csv", "sim/trajectory.csv",
                 "sim/metrics.json", "sim/overlay.svg", "report/metrics.json", "demo/scenario.json"):
        assert name in files, name


def test_byte_identical_reruns(two_runs):
    (_, a), (_, b) = two_runs
    assert sorted(a) == sorted(b)
    differing = [k for k in a if a[k] != b[k]]
    assert differing == []


def test_simulated_run_tracks(two_runs):
    (_, files), _ = two_runs
    m = json.loads(files["sim/metrics.json"])
    assert m["status"] == "route-complete"
    assert m["max_abs_cte"] < 0.5 and m["mean_localization_error"] < 0.1
    assert json.loads(files["report/metrics.json"]) == m


@pytest.mark.parametrize("argv,code", [
    (["route", "{fixture}", "--way", "id:12", "--origin", "40,-83", "-o", "{tmp}/r.csv"], 7),
    (["route", "{tmp}/bad.osm", "--way", "name", "--origin", "40,-83", "-o", "{tmp}/r.csv"], 5),
    (["route", "{fixture}", "--way", "name", "--origin", "40", "-o", "{tmp}/r.csv"], 2),
    (["route", "{tmp}/nope.osm", "--way", "name", "--origin", "40,-83", "-o", "{tmp}/r.csv"], 9),
    (["simulate", "--config", "{tmp}/nope.json", "--out", "{tmp}/o"], 4),
    (["map", "--scene", "{tmp}/nope.json", "--route", "{tmp}/r.csv", "--out", "{tmp}/m"], 4),
])
def test_exit_codes(argv, code, tmp_path):
    (tmp_path / "bad.osm").write_text("<osm>\n<node>\n</osm>")
    args = [a.format(fixture=fixture_path(), tmp=tmp_path) for a in argv]
    assert main(args) == code


def test_missing_ref_exit_code(tmp_path):
    (tmp_path / "ref.osm").write_text('<osm><node id="1" lat="0" lon="0"/><way id="2"><nd ref="1"/>'
                                      '<nd ref="99"/></way></osm>')
    assert main(["route", str(tmp_path / "ref.osm"), "--way", "id:2", "--origin", "0,0",
                 "-o", str(tmp_path / "r.csv")]) == 6


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.csv"
    proc = subprocess.run([sys.executable, "-m", "avshuttle", "route", str(fixture_path()), "--way", "name",
                           "--origin", "40,-83", "--spacing", "5", "-o", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().count("\n") == 6
