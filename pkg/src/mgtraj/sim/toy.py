"""Circle toy data: six starts on a circle, three fanning exits per start."""
from __future__ import annotations

import numpy as np

from .dataset import OBS_LEN, PRED_LEN, Dataset
from .grid import RESOLUTION, OccupancyGrid

N_STARTS = 6
N_MODES = 3
MODE_ANGLES = np.deg2rad([-60.0, 0.0, 60.0])


def circle_starts(radius=10.0, center=(15.0, 15.0)):
    ang = 2 * np.pi * np.arange(N_STARTS) / N_STARTS
    return np.stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)], axis=1)


def circle_path(start_id, mode, radius=10.0, center=(15.0, 15.0)):
    """Noise-free 20-step path: straight toward the centre, then a quadratic
    Bezier through the centre to an exit on the far side of the circle."""
    center = np.asarray(center, dtype=float)
    theta = 2 * np.pi * start_id / N_STARTS
    start = center + radius * np.array([np.cos(theta), np.sin(theta)])
    inward = -np.array([np.cos(theta), np.sin(theta)])
    step = 2 * radius / (OBS_LEN - 1 + PRED_LEN)
    obs = start + np.arange(OBS_LEN)[:, None] * step * inward
    exit_ang = theta + np.pi + MODE_ANGLES[mode]
    end = center + radius * np.array([np.cos(exit_ang), np.sin(exit_ang)])
    s = (np.arange(1, PRED_LEN + 1) / PRED_LEN)[:, None]
    last = obs[-1]
    fut = (1 - s) ** 2 * last + 2 * s * (1 - s) * center + s ** 2 * end
    return np.concatenate([obs, fut])


def make_circle_toy(seed=0, n_per_start=120, radius=10.0, jitter=0.05):
    """Uniform mode choice per trajectory, Gaussian jitter on every position."""
    rng = np.random.default_rng(seed)
    center = (15.0, 15.0)
    cells = int(np.ceil(2 * center[0] / RESOLUTION))
    walk = np.ones((cells, cells), dtype=bool)
    walk[0, :] = walk[-1, :] = walk[:, 0] = walk[:, -1] = False
    grid = OccupancyGrid(walk)
    paths, starts, modes = [], [], []
    for s in range(N_STARTS):
        for _ in range(n_per_start):
            m = int(rng.integers(N_MODES))
            paths.append(circle_path(s, m, radius, center) + rng.normal(0.0, jitter, (OBS_LEN + PRED_LEN, 2)))
            starts.append(s)
            modes.append(m)
    positions = np.stack(paths)
    n = len(positions)
    return Dataset(
        "circle", grid, positions, np.full_like(positions, np.nan), np.array(modes),
        np.arange(n), [("start", s) for s in starts], starts=np.array(starts),
        log={"radius": radius, "jitter": jitter},
    )
