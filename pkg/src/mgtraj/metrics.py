"""Min-over-k displacement errors, manifold precision/recall and mode counting."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

R_MAX = 2.0


def _pair(pred, y):
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    if pred.ndim == 2:
        pred = pred[None]
    if pred.shape[1:] != y.shape:
        raise ValueError(f"horizon mismatch: predictions {pred.shape[1:]} vs ground truth {y.shape}")
    if len(pred) == 0:
        raise ValueError("need at least one prediction")
    return pred, y


def ade_min_k(predictions, y):
    pred, y = _pair(predictions, y)
    return float(np.linalg.norm(pred - y, axis=-1).mean(axis=-1).min())


def fde_min_k(predictions, y):
    pred, y = _pair(predictions, y)
    return float(np.linalg.norm(pred[:, -1] - y[-1], axis=-1).min())


def radii(t_len, r_max=R_MAX):
    """Per-step radius ``R^t = R_max * t / T`` for t = 1..T."""
    return r_max * np.arange(1, t_len + 1) / t_len


def covered(query, ref, r_max=R_MAX):
    """Manifold score of every trajectory in ``query`` against the set ``ref``."""
    query = np.asarray(query, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if len(query) == 0:
        return np.zeros(0, dtype=bool)
    if len(ref) == 0:
        return np.zeros(len(query), dtype=bool)
    if query.shape[1:] != ref.shape[1:]:
        raise ValueError(f"horizon mismatch: {query.shape[1:]} vs {ref.shape[1:]}")
    return kernels.manifold_cover(query, ref, radii(query.shape[1], r_max)).astype(bool)


def manifold_score(phi, phis, r_max=R_MAX):
    """1 if ``phi`` stays inside the per-step discs around the set ``phis``, else 0."""
    phis = np.asarray(phis, dtype=float)
    if phis.size == 0:
        return 0
    return int(covered(np.asarray(phi, dtype=float)[None], phis, r_max)[0])


def precision(generated, ground_truth, r_max=R_MAX):
    if len(generated) == 0:
        raise ValueError("precision of an empty generated set")
    return float(covered(generated, ground_truth, r_max).mean())


def recall(generated, ground_truth, r_max=R_MAX):
    if len(ground_truth) == 0:
        raise ValueError("recall against an empty ground-truth set")
    return float(covered(ground_truth, generated, r_max).mean())


def f1(p, r):
    return 0.0 if p + r <= 0 else 2.0 * p * r / (p + r)


@dataclass
class MetricsReport:
    ade: float
    fde: float
    precision: float
    recall: float
    f1: float
    k: int
    r_max: float
    n_eval: int = 0

    def to_json(self):
        doc = {"ade": self.ade, "fde": self.fde, "precision": self.precision, "recall": self.recall,
               "f1": self.f1, "k": self.k, "r_max": self.r_max}
        return json.dumps(doc, indent=1) + "\n"

    def csv_row(self):
        return ",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in asdict(self).values())

    @staticmethod
    def csv_header():
        return "ade,fde,precision,recall,f1,k,r_max,n_eval"


METRICS_SCHEMA = {
    "type": "object",
    "required": ["ade", "fde", "precision", "recall", "f1", "k", "r_max"],
    "additionalProperties": False,
    "properties": {
        "ade": {"type": "number", "minimum": 0}, "fde": {"type": "number", "minimum": 0},
        "precision": {"type": "number", "minimum": 0, "maximum": 1},
        "recall": {"type": "number", "minimum": 0, "maximum": 1},
        "f1": {"type": "number", "minimum": 0, "maximum": 1},
        "k": {"type": "integer", "minimum": 1}, "r_max": {"type": "number", "exclusiveMinimum": 0},
    },
}


def summarize(per_sample, k, r_max):
    """Average per-sample (ade, fde, precision, recall) rows into a report."""
    arr = np.asarray(per_sample, dtype=float).reshape(-1, 4)
    ade, fde, p, r = arr.mean(axis=0)
    return MetricsReport(float(ade), float(fde), float(p), float(r), f1(p, r), k, r_max, len(arr))


# ---------------------------------------------------------------------------
# mode counting


def _heading(traj):
    d = traj[-1] - traj[0]
    return math.atan2(d[1], d[0])


def similar_trajectories(positions, anchor, start_radius=2.0, heading_tol=math.radians(45.0),
                         speed_tol=0.5, frame_dt=0.4, n_obs=8):
    """Indices of records whose observation resembles the anchor's.

    Similar means first observed position within ``start_radius``, observed
    heading within ``heading_tol`` and mean observed speed within ``speed_tol``.
    """
    positions = np.asarray(positions, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    obs = positions[:, :n_obs]
    a_obs = anchor[:n_obs]
    near = np.linalg.norm(obs[:, 0] - a_obs[0], axis=-1) <= start_radius
    disp = obs[:, -1] - obs[:, 0]
    head = np.arctan2(disp[:, 1], disp[:, 0])
    dh = np.abs((head - _heading(a_obs) + np.pi) % (2 * np.pi) - np.pi)
    speed = np.linalg.norm(np.diff(obs, axis=1), axis=-1).mean(axis=1) / frame_dt
    a_speed = np.linalg.norm(np.diff(a_obs, axis=0), axis=-1).mean() / frame_dt
    ok = near & (dh <= heading_tol) & (np.abs(speed - a_speed) <= speed_tol)
    return np.flatnonzero(ok)


def count_modes(positions, anchor, neighbors=None, r_max=R_MAX, collision_radius=0.5, n_obs=8,
                **kw):
    """Connected components of the per-step disc graph over futures similar to ``anchor``.

    Futures are taken relative to each record's last observed position.
    Records that pass within ``collision_radius`` of another pedestrian are
    dropped first.  Returns ``(counts per step, average)``.
    """
    positions = np.asarray(positions, dtype=float)
    idx = similar_trajectories(positions, anchor, n_obs=n_obs, **kw)
    if neighbors is not None and len(idx):
        nb = np.asarray(neighbors, dtype=float)[idx]
        dist = np.linalg.norm(positions[idx] - nb, axis=-1)
        clear = ~np.any(np.nan_to_num(dist, nan=np.inf) < collision_radius, axis=1)
        idx = idx[clear]
    t_len = positions.shape[1] - n_obs
    if len(idx) == 0:
        log.info("count_modes: no trajectories similar to the anchor")
        return np.zeros(t_len, dtype=int), 0.0
    fut = positions[idx, n_obs:] - positions[idx, n_obs - 1:n_obs]
    rs = radii(t_len, r_max)
    counts = np.array([kernels.disc_components(fut[:, t], rs[t]) for t in range(t_len)])
    return counts, float(counts.mean())
