"""Synthetic trajectory datasets: simulation, grouping into ground-truth sets, file I/O."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import kernels
from .grid import OccupancyGrid, read_pgm, write_pgm

log = logging.getLogger(__name__)

OBS_LEN = 8
PRED_LEN = 12
SEQ_LEN = OBS_LEN + PRED_LEN
FRAME_DT = 0.4
SIM_DT = 0.1
SUBSAMPLE = 4
KEY_POS_M = 0.5
KEY_HEADING_DEG = 30.0


@dataclass(frozen=True)
class SocialForceParams:
    tau: float = 0.5
    rep_a: float = 2.0
    rep_b: float = 0.3
    rep_r: float = 0.6
    obs_a: float = 5.0
    obs_b: float = 0.1
    obs_r: float = 0.3
    dt: float = SIM_DT
    vmax_factor: float = 1.3
    switch_radius: float = 1.0
    projection_margin: float = 0.05

    def as_array(self):
        return np.array([self.tau, self.rep_a, self.rep_b, self.rep_r, self.obs_a, self.obs_b,
                         self.obs_r, self.dt, self.vmax_factor, self.switch_radius,
                         self.projection_margin])


def threads():
    try:
        return max(1, int(os.environ["MGTRAJ_THREADS"]))
    except (KeyError, ValueError):
        return os.cpu_count() or 1


def split_obs_future(positions):
    """Split a 20-step record into its 8 observed and 12 future positions."""
    positions = np.asarray(positions)
    if positions.shape[-2] != SEQ_LEN:
        raise ValueError(f"record has {positions.shape[-2]} steps, expected {SEQ_LEN}")
    return positions[..., :OBS_LEN, :], positions[..., OBS_LEN:, :]


def observation_key(obs):
    """Quantised last observed position (0.5 m) and heading (30 degree buckets)."""
    last, prev = obs[-1], obs[-2]
    heading = math.degrees(math.atan2(last[1] - prev[1], last[0] - prev[0]))
    bucket = int(round(heading / KEY_HEADING_DEG)) % int(360 / KEY_HEADING_DEG)
    return (int(round(last[0] / KEY_POS_M)), int(round(last[1] / KEY_POS_M)), bucket)


@dataclass
class Dataset:
    """Records of 20 positions plus everything needed to evaluate against the ground truth.

    ``neighbors`` holds the other pedestrian's position per step (NaN when
    absent).  ``keys`` assigns each record to its ground-truth group: records
    sharing a key share an observation, and their futures form that
    observation's support.
    """

    scene_id: str
    grid: OccupancyGrid
    positions: np.ndarray
    neighbors: np.ndarray
    routes: np.ndarray
    episodes: np.ndarray
    keys: list
    pref_speed: np.ndarray | None = None
    starts: np.ndarray | None = None
    log: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.positions)

    @property
    def obs(self):
        return self.positions[:, :OBS_LEN]

    @property
    def fut(self):
        return self.positions[:, OBS_LEN:]

    def groups(self):
        """Ground-truth sets: key -> array of record indices, in first-seen order."""
        out = {}
        for i, k in enumerate(self.keys):
            out.setdefault(k, []).append(i)
        return {k: np.asarray(v) for k, v in out.items()}

    def relative_futures(self, idx):
        idx = np.atleast_1d(idx)
        return self.positions[idx, OBS_LEN:] - self.positions[idx, OBS_LEN - 1:OBS_LEN]

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(
            self.scene_id, self.grid, self.positions[idx], self.neighbors[idx],
            self.routes[idx], self.episodes[idx], [self.keys[i] for i in idx],
            None if self.pref_speed is None else self.pref_speed[idx],
            None if self.starts is None else self.starts[idx], dict(self.log),
        )

    def train_test_split(self, test_fraction=0.2):
        """Split by episode so no pedestrian appears on both sides."""
        eps = np.unique(self.episodes)
        stride = max(2, int(round(1.0 / test_fraction)))
        test_eps = set(eps[stride - 1::stride].tolist())
        is_test = np.array([e in test_eps for e in self.episodes])
        return np.flatnonzero(~is_test), np.flatnonzero(is_test)


def near_junction(positions, junction, lo=1.0, hi=8.0, half_width=2.1, max_turn=None):
    """Records whose last observed position lies on the south approach, ``lo``..``hi`` m
    before the junction centre (where the routes are about to split).

    With ``max_turn`` (radians) the heading of the last observed step must still point
    north within that angle, so pedestrians who already committed to a turn
    are excluded.
    """
    positions = np.asarray(positions)
    last = positions[:, OBS_LEN - 1]
    ahead = junction[1] - last[:, 1]
    ok = (ahead >= lo) & (ahead <= hi) & (np.abs(last[:, 0] - junction[0]) < half_width)
    if max_turn is not None:
        d = last - positions[:, OBS_LEN - 2]
        ok &= np.abs(np.arctan2(d[:, 0], d[:, 1])) <= max_turn
    return ok


def junction_keys(ds, junction, min_members=5, **kw):
    """Ground-truth groups just before the split, with at least ``min_members`` futures.

    Returns ``{key: member indices}``.
    """
    mask = near_junction(ds.positions, junction, **kw)
    return {k: v for k, v in ds.groups().items() if len(v) >= min_members and mask[v].all()}



def split_keys(ds, junction, min_members=5):
    """Ground-truth groups of pedestrians about to reach the split, still walking straight.

    Last observed position at most 2.5 m before the centre, last step within
    15 degrees of the approach direction.
    """
    return junction_keys(ds, junction, min_members, lo=0.0, hi=2.5, max_turn=math.radians(15.0))

# ---------------------------------------------------------------------------
# simulation


def _simulate_episode(scene, index, seed, params, pair_prob, windows_per_agent, max_steps):
    rng = np.random.default_rng([seed, index])
    routes = scene.routes_from("south")
    probs = np.array([r.probability for r in routes])
    n_agents = 2 if rng.random() < pair_prob else 1
    pos0, speeds, wps, starts, spawn, route_ids = [], [], [], [0], [], []
    for a in range(n_agents):
        ridx = int(rng.choice(len(routes), p=probs))
        route = routes[ridx]
        off = rng.uniform(-route.spawn_halfwidth, route.spawn_halfwidth)
        pos0.append((route.spawn_center[0] + off * route.lateral[0],
                     route.spawn_center[1] + off * route.lateral[1]))
        speeds.append(float(np.clip(rng.normal(1.3, 0.15), 0.9, 1.7)))
        wps.extend(route.waypoints)
        starts.append(len(wps))
        spawn.append(0 if a == 0 else SUBSAMPLE * int(rng.integers(3, 16)))
        route_ids.append(ridx)
    hist, act, fin, nproj = kernels.simulate_episode(
        scene.grid.blocked.astype(np.uint8), scene.grid.resolution, np.array(pos0),
        np.array(speeds), np.array(wps), np.array(starts), np.array(spawn), max_steps,
        params.as_array(),
    )
    out, discarded = [], 0
    for a in range(n_agents):
        if fin[a] < 0:
            discarded += 1
            continue
        steps = np.arange(spawn[a], fin[a] + 1, SUBSAMPLE)
        frames = len(steps)
        if frames < SEQ_LEN:
            discarded += 1
            continue
        track = hist[a, steps]
        nb = np.full((frames, 2), np.nan)
        for b in range(n_agents):
            if b != a:
                present = act[b, steps].astype(bool)
                nb[present] = hist[b, steps[present]]
        n_win = min(windows_per_agent, frames - SEQ_LEN + 1)
        offs = np.sort(rng.choice(frames - SEQ_LEN + 1, size=n_win, replace=False))
        for o in offs:
            out.append({
                "positions": track[o:o + SEQ_LEN],
                "neighbors": nb[o:o + SEQ_LEN],
                "route": route_ids[a],
                "episode": index,
                "pref_speed": speeds[a],
                "projections": int(nproj[a]),
            })
    return out, discarded


def simulate_dataset(scene, n_trajectories, seed=0, max_agents_concurrent=2, params=None,
                     pair_prob=0.35, windows_per_agent=4, max_steps=2000, chunk=64):
    """Simulate pedestrians walking the scene's routes and cut 20-frame records.

    Episodes run at 0.1 s and are subsampled to 0.4 s frames.  Each episode
    owns the RNG stream ``(seed, episode index)``, so the result does not
    depend on how episodes are spread over threads.
    """
    if n_trajectories <= 0:
        raise ValueError("n_trajectories must be positive")
    if max_agents_concurrent < 1 or max_agents_concurrent > 2:
        raise ValueError("max_agents_concurrent must be 1 or 2")
    params = params or SocialForceParams()
    if max_agents_concurrent == 1:
        pair_prob = 0.0
    records, discarded, episode = [], 0, 0
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        while len(records) < n_trajectories:
            batch = list(pool.map(
                lambda i: _simulate_episode(scene, i, seed, params, pair_prob,
                                            windows_per_agent, max_steps),
                range(episode, episode + chunk),
            ))
            episode += chunk
            for recs, disc in batch:
                discarded += disc
                records.extend(recs)
    records = records[:n_trajectories]
    if discarded:
        log.info("discarded %d pedestrians that did not reach their goal", discarded)
    positions = np.stack([r["positions"] for r in records])
    ds = Dataset(
        scene.scene_id, scene.grid, positions, np.stack([r["neighbors"] for r in records]),
        np.array([r["route"] for r in records]), np.array([r["episode"] for r in records]),
        [observation_key(p[:OBS_LEN]) for p in positions],
        pref_speed=np.array([r["pref_speed"] for r in records]),
        log={"discarded": discarded, "projections": int(sum(r["projections"] for r in records)),
             "episodes": episode},
    )
    return ds


# ---------------------------------------------------------------------------
# files


def save_dataset(ds, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectories.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("scene_id,ped_id,t,x,y,split\n")
        for pid, traj in enumerate(ds.positions):
            for t, (x, y) in enumerate(traj):
                split = "obs" if t < OBS_LEN else "fut"
                fh.write(f"{ds.scene_id},{pid},{t * FRAME_DT:.1f},{x:.6f},{y:.6f},{split}\n")
    with open(out / "neighbors.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("ped_id,t,x,y\n")
        for pid, nb in enumerate(ds.neighbors):
            for t, (x, y) in enumerate(nb):
                if not np.isnan(x):
                    fh.write(f"{pid},{t * FRAME_DT:.1f},{x:.6f},{y:.6f}\n")
    write_pgm(ds.grid, out / "occupancy.pgm")
    groups = ds.groups()
    index = {
        "scene_id": ds.scene_id,
        "n_records": len(ds),
        "route": ds.routes.tolist(),
        "episode": ds.episodes.tolist(),
        "start": None if ds.starts is None else ds.starts.tolist(),
        "groups": [{"key": list(k), "members": v.tolist()} for k, v in groups.items()],
        "log": ds.log,
    }
    (out / "gt_index.json").write_text(json.dumps(index, separators=(",", ":")) + "\n",
                                       encoding="utf-8")
    return out


def load_dataset(path):
    path = Path(path)
    index = json.loads((path / "gt_index.json").read_text(encoding="utf-8"))
    n = index["n_records"]
    positions = np.zeros((n, SEQ_LEN, 2))
    with open(path / "trajectories.csv", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for scene_id, pid, t, x, y, _ in reader:
            positions[int(pid), int(round(float(t) / FRAME_DT))] = (float(x), float(y))
    neighbors = np.full((n, SEQ_LEN, 2), np.nan)
    nb_file = path / "neighbors.csv"
    if nb_file.exists():
        with open(nb_file, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for pid, t, x, y in reader:
                neighbors[int(pid), int(round(float(t) / FRAME_DT))] = (float(x), float(y))
    keys = [None] * n
    for g in index["groups"]:
        key = tuple(g["key"])
        for m in g["members"]:
            keys[m] = key
    starts = index.get("start")
    return Dataset(
        index["scene_id"], read_pgm(path / "occupancy.pgm"), positions, neighbors,
        np.array(index["route"]), np.array(index["episode"]), keys,
        starts=None if starts is None else np.array(starts), log=index.get("log", {}),
    )
