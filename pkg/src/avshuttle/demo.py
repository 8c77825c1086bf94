"""The bundled canonical demo: a looped ~200 m shuttle route with roadside structure."""

from __future__ import annotations

import math

import numpy as np

from .control import Route
from .scene import Box, Cylinder, Scene

LOOP_SIZE = (76.0, 44.0)
CORNER_RADIUS = 18.0
# the route stops short of its start so "within 1 m of the final waypoint"
# cannot fire on the first step
END_GAP = 5.0
SCENE_SEED = 7


def rounded_rectangle(width=LOOP_SIZE[0], height=LOOP_SIZE[1], radius=CORNER_RADIUS, step=1.0,
                      gap=END_GAP) -> np.ndarray:
    """Counter-clockwise loop centred on the origin, starting mid bottom edge heading +x."""
    hx, hy = width / 2 - radius, height / 2 - radius
    if hx < 0 or hy < 0:
        raise ValueError("corner radius too large for the rectangle")
    straight = (2 * hx, 2 * hy)
    arc = 0.5 * math.pi * radius
    pieces = [hx, arc, straight[1], arc, straight[0], arc, straight[1], arc, hx]
    total = sum(pieces)
    s = np.arange(0.0, total - gap + 1e-9, step)
    if total - gap - s[-1] > 1e-9:
        s = np.append(s, total - gap)
    corners = [(hx, -hy), (hx, hy), (-hx, hy), (-hx, -hy)]
    edges = np.cumsum([0.0] + pieces)
    pts = np.empty((len(s), 2))
    for k, sk in enumerate(s):
        i = min(int(np.searchsorted(edges, sk, side="right") - 1), len(pieces) - 1)
        u = sk - edges[i]
        if i % 2 == 1:
            c = corners[i // 2]
            th = -0.5 * math.pi + 0.5 * math.pi * (i // 2) + u / radius
            pts[k] = (c[0] + radius * math.cos(th), c[1] + radius * math.sin(th))
        else:
            # straights run along +x, +y, -x, -y, +x in turn
            j = i // 2
            start = [(0.0, -height / 2), (width / 2, -hy), (hx, height / 2), (-width / 2, hy),
                     (-hx, -height / 2)][j]
            d = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 0)][j]
            pts[k] = (start[0] + u * d[0], start[1] + u * d[1])
    return pts


def demo_route() -> Route:
    return Route(rounded_rectangle())


def demo_scene(seed: int = SCENE_SEED) -> Scene:
    """Roadside boxes and poles on both sides of the loop plus an outer wall."""
    rng = np.random.default_rng(seed)
    route = Route(rounded_rectangle(gap=0.0, step=0.5))
    boxes, cylinders = [], []
    for s in np.arange(2.0, route.length, 6.0):
        p = route.point_at(s)
        a, b = route.point_at(s - 0.5), route.point_at(s + 0.5)
        t = (b - a) / np.linalg.norm(b - a)
        n = np.array([-t[1], t[0]])
        for side in (1.0, -1.0):
            off = rng.uniform(4.5, 6.5)
            c = p + side * off * n
            if rng.uniform() < 0.6:
                half = rng.uniform(0.5, 1.2, size=2)
                boxes.append(Box((c[0] - half[0], c[1] - half[1], 0.0),
                                 (c[0] + half[0], c[1] + half[1], rng.uniform(1.0, 3.0))))
            else:
                cylinders.append(Cylinder((c[0], c[1], 0.0), rng.uniform(0.2, 0.4), rng.uniform(2.0, 4.0)))
    hw, hh = LOOP_SIZE[0] / 2 + 10.0, LOOP_SIZE[1] / 2 + 10.0
    boxes += [
        Box((-hw, -hh - 0.5, 0.0), (hw, -hh, 4.0)),
        Box((-hw, hh, 0.0), (hw, hh + 0.5, 4.0)),
        Box((-hw - 0.5, -hh, 0.0), (-hw, hh, 4.0)),
        Box((hw, -hh, 0.0), (hw + 0.5, hh, 4.0)),
    ]
    return Scene(ground_z=0.0, boxes=boxes, cylinders=cylinders)


def corridor_scene(seed: int = 3, length: float = 90.0) -> Scene:
    """Straight corridor along +x: two walls at y = +-6 with alcove boxes and poles."""
    rng = np.random.default_rng(seed)
    x0, x1 = -20.0, -20.0 + length
    boxes = [Box((x0, 6.0, 0.0), (x1, 6.5, 4.0)), Box((x0, -6.5, 0.0), (x1, -6.0, 4.0))]
    for x in np.arange(-10.0, x1, 7.0):
        boxes.append(Box((x + rng.uniform(0, 1), rng.uniform(3.5, 4.5), 0.0),
                         (x + rng.uniform(1.5, 2.5), 6.0, rng.uniform(1, 3))))
        boxes.append(Box((x + rng.uniform(2, 3), -6.0, 0.0),
                         (x + rng.uniform(3.5, 4), -rng.uniform(3.5, 4.5), rng.uniform(1, 3))))
    cylinders = [Cylinder((x + rng.uniform(0, 2), rng.choice([-3.0, 3.0]), 0.0), 0.3, 3.0)
                 for x in np.arange(-5.0, x1, 5.0)]
    return Scene(ground_z=0.0, boxes=boxes, cylinders=cylinders)
