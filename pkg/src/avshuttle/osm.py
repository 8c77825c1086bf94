"""OpenStreetMap XML subset: parsing, local projection and route extraction.

Only ``<node id lat lon>`` and ``<way id>`` with ``<nd ref>`` / ``<tag k v>``
children are read. Everything else in the file is ignored.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .control import Route
from .errors import InvalidArgumentError, NotFoundError, OsmParseError, OsmReferenceError, TopologyError
from .scene import Box, Scene

R_EARTH = 6371000.0
BUILDING_HEIGHT = 6.0


@dataclass(frozen=True)
class OsmWay:
    id: int
    refs: tuple
    tags: tuple = ()

    def tag(self, key, default=None):
        for k, v in self.tags:
            if k == key:
                return v
        return default


@dataclass
class OsmDocument:
    nodes: dict = field(default_factory=dict)  # id -> (lat, lon)
    ways: list = field(default_factory=list)


@dataclass(frozen=True)
class EnuOrigin:
    lat0: float
    lon0: float
    z0: float = 0.0

    def __post_init__(self):
        _check_latlon(self.lat0, self.lon0)
        if not math.isfinite(self.z0):
            raise InvalidArgumentError("origin elevation must be finite")


def _check_latlon(lat, lon, where=""):
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        raise InvalidArgumentError(f"{where}latitude {lat} out of range")
    if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
        raise InvalidArgumentError(f"{where}longitude {lon} out of range")


def _int_attr(el, name):
    try:
        return int(el.attrib[name])
    except (KeyError, ValueError):
        raise OsmParseError(f"<{el.tag}> needs an integer '{name}' attribute")


def parse_osm(xml_text) -> OsmDocument:
    if isinstance(xml_text, bytes):
        xml_text = xml_text.decode("utf-8")
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise OsmParseError(f"malformed XML: {exc}", line=exc.position[0]) from None
    if root.tag != "osm":
        raise OsmParseError(f"root element must be <osm>, got <{root.tag}>")

    doc = OsmDocument()
    for el in root.iter("node"):
        nid = _int_attr(el, "id")
        try:
            lat, lon = float(el.attrib["lat"]), float(el.attrib["lon"])
        except (KeyError, ValueError):
            raise OsmParseError(f"node {nid} needs numeric lat and lon")
        try:
            _check_latlon(lat, lon, f"node {nid}: ")
        except InvalidArgumentError as exc:
            raise OsmParseError(str(exc)) from None
        doc.nodes[nid] = (lat, lon)

    for el in root.iter("way"):
        wid = _int_attr(el, "id")
        refs = tuple(_int_attr(nd, "ref") for nd in el.findall("nd"))
        for r in refs:
            if r not in doc.nodes:
                raise OsmReferenceError(wid, r)
        tags = tuple((t.attrib.get("k", ""), t.attrib.get("v", "")) for t in el.findall("tag"))
        doc.ways.append(OsmWay(wid, refs, tags))
    return doc


def load_osm(path) -> OsmDocument:
    with open(path, "rb") as fh:
        return parse_osm(fh.read())


def latlon_to_enu(lat: float, lon: float, origin: EnuOrigin):
    """Equirectangular projection about the origin (valid for small extents)."""
    x = R_EARTH * math.cos(math.radians(origin.lat0)) * math.radians(lon - origin.lon0)
    y = R_EARTH * math.radians(lat - origin.lat0)
    return x, y


def select_ways(doc: OsmDocument, selector: str) -> list:
    """``id:1,2`` picks ways by id (in that order), ``k=v`` by tag value and ``k`` by tag presence."""
    selector = selector.strip()
    if selector.startswith("id:"):
        try:
            ids = [int(s) for s in selector[3:].split(",") if s.strip()]
        except ValueError:
            raise InvalidArgumentError(f"bad id selector {selector!r}")
        by_id = {w.id: w for w in doc.ways}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise NotFoundError(f"no way with id {', '.join(map(str, missing))}")
        return [by_id[i] for i in ids]
    if "=" in selector:
        key, value = selector.split("=", 1)
        picked = [w for w in doc.ways if w.tag(key) == value]
    else:
        picked = [w for w in doc.ways if w.tag(selector) is not None]
    if not picked:
        raise NotFoundError(f"selector {selector!r} matches no way")
    return picked


def chain_ways(ways) -> list:
    """Join ways sharing endpoint nodes into one node sequence.

    Ways are consumed in the given order, each attached (reversed if needed)
    to whichever end of the chain it touches.
    """
    chain = list(ways[0].refs)
    pending = list(ways[1:])
    while pending:
        for k, w in enumerate(pending):
            refs = list(w.refs)
            if refs[0] == chain[-1]:
                chain += refs[1:]
            elif refs[-1] == chain[-1]:
                chain += refs[::-1][1:]
            elif refs[-1] == chain[0]:
                chain = refs[:-1] + chain
            elif refs[0] == chain[0]:
                chain = refs[::-1][:-1] + chain
            else:
                continue
            del pending[k]
            break
        else:
            ids = ", ".join(str(w.id) for w in pending)
            raise TopologyError(
                f"ways {ids} share no endpoint with the chain ending at nodes {chain[0]} and {chain[-1]}")
    return chain


def resample_polyline(points, spacing: float) -> np.ndarray:
    """Points every ``spacing`` meters of arclength, plus the end point."""
    if not spacing > 0:
        raise InvalidArgumentError(f"spacing must be positive, got {spacing}")
    pts = np.asarray(points, dtype=float)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    keep = np.concatenate([[True], seg > 0])
    pts, seg = pts[keep], seg[seg > 0]
    if len(pts) < 2:
        raise TopologyError("route polyline has zero length")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    # tolerance keeps float round-off from adding a sliver at the end
    tol = 1e-9 * max(1.0, total)
    n = int(math.floor(total / spacing + 1e-9))
    stations = spacing * np.arange(n + 1)
    if total - stations[-1] > tol:
        stations = np.append(stations, total)
    else:
        stations[-1] = total
    x = np.interp(stations, s, pts[:, 0])
    y = np.interp(stations, s, pts[:, 1])
    return np.column_stack([x, y])


def extract_route(doc: OsmDocument, way_selector: str, origin: EnuOrigin, spacing: float) -> Route:
    if not spacing > 0:
        raise InvalidArgumentError(f"spacing must be positive, got {spacing}")
    chain = chain_ways(select_ways(doc, way_selector))
    xy = [latlon_to_enu(*doc.nodes[n], origin) for n in chain]
    return Route(resample_polyline(xy, spacing))


def buildings_to_scene(doc: OsmDocument, origin: EnuOrigin, height: float = BUILDING_HEIGHT,
                       ground: bool = True) -> Scene:
    """Axis-aligned boxes over the footprint bounds of every ``building`` way."""
    boxes = []
    for w in doc.ways:
        if w.tag("building") is None or len(w.refs) < 3:
            continue
        xy = np.array([latlon_to_enu(*doc.nodes[n], origin) for n in w.refs])
        lo, hi = xy.min(axis=0), xy.max(axis=0)
        if np.any(hi - lo <= 0):
            continue
        boxes.append(Box((lo[0], lo[1], origin.z0), (hi[0], hi[1], origin.z0 + height)))
    return Scene(ground_z=origin.z0 if ground else None, boxes=boxes)


def fixture_path():
    from importlib.resources import files

    return files("avshuttle") / "data" / "fixture.osm"
