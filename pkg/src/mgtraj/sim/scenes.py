"""Parametric junction scenes standing in for the real intersection map."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RESOLUTION, OccupancyGrid

GRID_CELLS = 60


@dataclass
class Route:
    name: str
    spawn_center: tuple
    spawn_halfwidth: float
    lateral: tuple
    waypoints: list
    probability: float
    spawn_region: str = "south"


@dataclass
class Scene:
    scene_id: str
    grid: OccupancyGrid
    routes: list
    junction: tuple
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        by_region = {}
        for r in self.routes:
            by_region.setdefault(r.spawn_region, 0.0)
            by_region[r.spawn_region] += r.probability
        for region, total in by_region.items():
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"route probabilities for spawn region {region!r} sum to {total}")

    def routes_from(self, region):
        return [r for r in self.routes if r.spawn_region == region]


def _corridor_grid(width_m, kind, cells=GRID_CELLS, res=RESOLUTION):
    centers = (np.arange(cells) + 0.5) * res
    cx = cy = cells * res / 2.0
    half = width_m / 2.0
    xs = np.abs(centers - cx) < half          # columns inside the vertical corridor
    ys = np.abs(centers - cy) < half          # rows inside the horizontal corridor
    walk = np.zeros((cells, cells), dtype=bool)
    if kind in ("corridor", "two_way", "three_way"):
        walk[:, xs] = True
    if kind == "three_way":
        walk[ys, :] = True
    elif kind == "two_way":
        walk[np.ix_(ys, centers > cx - half)] = True
    walk[0, :] = walk[-1, :] = walk[:, 0] = walk[:, -1] = False
    return OccupancyGrid(walk, res), (cx, cy)


def build_junction_scene(kind, corridor_width=4.2, seed=0):
    """Crossroads (``three_way``), T-junction (``two_way``) or ``corridor``.

    Pedestrians enter from the south arm.  ``three_way`` offers straight,
    left and right exits, ``two_way`` straight and right, ``corridor`` only
    straight; all routes from the spawn region are equally likely.  ``seed``
    is accepted for interface symmetry; the layout itself is deterministic.
    """
    if kind not in ("two_way", "three_way", "corridor"):
        raise ValueError(f"unknown junction kind {kind!r}")
    if corridor_width < 2 * RESOLUTION:
        raise ValueError(f"corridor width {corridor_width} m is below two cells")
    grid, (cx, cy) = _corridor_grid(corridor_width, kind)
    size = grid.width * grid.resolution
    edge = 1.6
    spawn = (cx, edge)
    jitter = max(0.0, min(0.6, corridor_width / 2.0 - 0.8))
    exits = {
        "straight": [(cx, cy), (cx, size - edge)],
        "left": [(cx, cy), (edge, cy)],
        "right": [(cx, cy), (size - edge, cy)],
    }
    names = {"three_way": ["straight", "left", "right"], "two_way": ["straight", "right"],
             "corridor": ["straight"]}[kind]
    prob = 1.0 / len(names)
    routes = [Route(n, spawn, jitter, (1.0, 0.0), exits[n], prob) for n in names]
    scene_id = {"three_way": "junction3", "two_way": "junction2", "corridor": "corridor"}[kind]
    scene = Scene(scene_id, grid, routes, (cx, cy), {"kind": kind, "corridor_width": corridor_width})
    for r in routes:
        if not grid.walkable_points(np.asarray(r.waypoints + [r.spawn_center])).all():
            raise ValueError(f"route {r.name} has a waypoint on a blocked cell")
    return scene
