"""Turning PM-Net's generator distribution into k predicted trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .model import last_displacement
from .sim.dataset import PRED_LEN

STRATEGIES = ("random", "expectation")
PREDICTION_HEADER = "sample_id,generator_id,pi,t,x,y"


def _check_simplex(pi):
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or pi.size == 0 or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-6:
        raise ValueError(f"pi must be a probability vector, got {pi}")
    return pi


def sample_random(pi, k, rng):
    """``k`` i.i.d. generator indices drawn from ``pi``."""
    pi = _check_simplex(pi)
    if k < 1:
        raise ValueError("k must be at least 1")
    return rng.choice(len(pi), size=k, p=pi)


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def sample_expectation(pi, k):
    """Per-generator counts ``round(k * pi)`` adjusted to sum to exactly ``k``.

    The generator with the highest ``pi`` absorbs the rounding error; if that
    would make its count negative, the remainder moves on to the next one.
    """
    pi = _check_simplex(pi)
    if k < 1:
        raise ValueError("k must be at least 1")
    counts = round_half_away(k * pi).astype(np.int64)
    diff = k - int(counts.sum())
    for g in np.argsort(-pi, kind="stable"):
        if diff == 0:
            break
        new = max(0, counts[g] + diff)
        diff -= new - counts[g]
        counts[g] = new
    return counts


def allocate(pi, k, strategy, rng):
    """Generator index for each of the ``k`` samples, grouped by generator."""
    if strategy == "random":
        return np.sort(sample_random(pi, k, rng), kind="stable")
    if strategy == "expectation":
        return np.repeat(np.arange(len(pi)), sample_expectation(pi, k))
    raise ValueError(f"unknown sampling strategy {strategy!r}")


@dataclass
class PredictionSet:
    trajectories: np.ndarray   # (k, 12, 2)
    generator_ids: np.ndarray  # (k,)
    pi: np.ndarray             # (k,) pi of the chosen generator
    noise_seeds: np.ndarray    # (k,)

    def __len__(self):
        return len(self.trajectories)


def predict_batch(model, batch, k, strategy, rng):
    """One PredictionSet per row of ``batch``; encodes once and computes pi once.

    Each trajectory draws its noise from its own seed so the set can be
    reproduced sample by sample.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    cfg = model.config
    b = len(batch)
    with nn.no_grad():
        c = model.encoder(batch)
        pis = model.pi(c).data
        ids = np.stack([allocate(pis[i], k, strategy, rng) for i in range(b)])
        seeds = rng.integers(0, 2**63 - 1, size=(b, k), dtype=np.int64)
        z = np.stack([np.random.default_rng(int(s)).standard_normal(cfg.z_dim + cfg.code_dim)
                      for s in seeds.ravel()]) if b else np.zeros((0, cfg.z_dim))
        if cfg.code_dim:
            codes = seeds.ravel() % cfg.code_dim
            z[:, cfg.z_dim:] = np.eye(cfg.code_dim)[codes]
        rows = np.repeat(np.arange(b), k)
        traj = model.generate(nn.take_rows(c, rows), ids.ravel(), z,
                              last_displacement(batch.obs)[rows], batch.obs[rows, -1]).data
    traj = traj.reshape(b, k, PRED_LEN, 2)
    return [PredictionSet(traj[i], ids[i], pis[i][ids[i]], seeds[i]) for i in range(b)]


def predict(model, batch, k=20, strategy="expectation", rng=None):
    """Prediction set for a single-record batch."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if len(batch) != 1:
        raise ValueError("predict expects a single observation; use predict_batch")
    return predict_batch(model, batch, k, strategy, rng)[0]


def write_predictions(path, sets, offset=0):
    """Dump prediction sets as CSV, one row per (sample, step)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(PREDICTION_HEADER + "\n")
        sid = offset
        for ps in sets:
            for traj, g, p in zip(ps.trajectories, ps.generator_ids, ps.pi):
                for t, (x, y) in enumerate(traj, start=1):
                    fh.write(f"{sid},{int(g)},{p:.6f},{t},{x:.6f},{y:.6f}\n")
                sid += 1
