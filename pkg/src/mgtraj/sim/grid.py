from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RESOLUTION = 0.7
PATCH_SIZE = 32


@dataclass
class OccupancyGrid:
    """Binary walkable map. Row index grows with y, column index with x."""

    walkable: np.ndarray
    resolution: float = RESOLUTION

    def __post_init__(self):
        self.walkable = np.asarray(self.walkable, dtype=bool)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if not self.walkable.any():
            raise ValueError("grid has no walkable cell")
        w = self.walkable
        if w[0].any() or w[-1].any() or w[:, 0].any() or w[:, -1].any():
            raise ValueError("border cells must be blocked")

    @property
    def height(self):
        return self.walkable.shape[0]

    @property
    def width(self):
        return self.walkable.shape[1]

    @property
    def blocked(self):
        return ~self.walkable

    def cell_of(self, x, y):
        return math.floor(y / self.resolution), math.floor(x / self.resolution)

    def is_walkable(self, x, y):
        r, c = self.cell_of(x, y)
        if r < 0 or c < 0 or r >= self.height or c >= self.width:
            return False
        return bool(self.walkable[r, c])

    def walkable_points(self, points):
        """Vectorised walkability for an (N, 2) array of metric points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        rows = np.floor(pts[:, 1] / self.resolution).astype(int)
        cols = np.floor(pts[:, 0] / self.resolution).astype(int)
        ok = (rows >= 0) & (cols >= 0) & (rows < self.height) & (cols < self.width)
        out = np.zeros(len(pts), dtype=bool)
        out[ok] = self.walkable[rows[ok], cols[ok]]
        return out


def crop_patch(grid, position, size=PATCH_SIZE):
    """Walkable mask of a ``size`` x ``size`` window centred on ``position``.

    Cells outside the grid count as blocked.  Entry ``[i, j]`` covers grid
    cell ``(r - size//2 + i, c - size//2 + j)`` where ``(r, c)`` holds the
    position.
    """
    r, c = grid.cell_of(float(position[0]), float(position[1]))
    half = size // 2
    out = np.zeros((size, size), dtype=np.uint8)
    r0, c0 = r - half, c - half
    rs, re = max(r0, 0), min(r0 + size, grid.height)
    cs, ce = max(c0, 0), min(c0 + size, grid.width)
    if rs < re and cs < ce:
        out[rs - r0:re - r0, cs - c0:ce - c0] = grid.walkable[rs:re, cs:ce]
    return out


def write_pgm(grid, path):
    """Binary PGM (P5): 0 blocked, 255 walkable, plus a resolution sidecar JSON."""
    path = Path(path)
    img = np.where(grid.walkable, 255, 0).astype(np.uint8)
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    path.write_bytes(header + img.tobytes())
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps({"resolution_m": grid.resolution}) + "\n", encoding="utf-8")


def read_pgm(path):
    path = Path(path)
    raw = path.read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    width, height = int(tokens[1]), int(tokens[2])
    data = np.frombuffer(raw[pos + 1:pos + 1 + width * height], dtype=np.uint8)
    resolution = RESOLUTION
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        resolution = float(json.loads(sidecar.read_text(encoding="utf-8"))["resolution_m"])
    return OccupancyGrid(data.reshape(height, width) > 127, resolution)
