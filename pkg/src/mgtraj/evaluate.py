"""Evaluation of a trained model against the ground-truth sets of a dataset."""
from __future__ import annotations

import numpy as np

from . import metrics
from .model import make_batch, patch_table
from .sampling import predict_batch
from .sim import near_junction

MIN_GROUP = 5


def evaluation_indices(ds, min_group=MIN_GROUP, multimodal=False):
    """Held-out records whose ground-truth set has at least ``min_group`` members.

    A set of one or two futures says little about the conditional
    distribution, so precision and recall are only measured where the
    support is sampled reasonably well.  With ``multimodal`` only records
    whose set contains futures from two or more routes are kept.
    """
    _, test = ds.train_test_split()
    groups = ds.groups()
    keep = []
    for i in test:
        members = groups[ds.keys[i]]
        if len(members) < min_group:
            continue
        if multimodal and len(np.unique(ds.routes[members])) < 2:
            continue
        keep.append(i)
    return np.array(keep, dtype=int)


def split_window(ds, junction):
    """Mask of records about to reach the split of a junction scene, still walking straight."""
    return near_junction(ds.positions, junction, lo=0.0, hi=4.0, max_turn=np.radians(15.0))


def evaluate(model, ds, idx=None, k=20, strategy="expectation", r_max=metrics.R_MAX, seed=0,
             batch_size=128):
    """Predict ``k`` futures per evaluation record and score them.

    Errors are measured against the record's own future; precision and
    recall against every future in its ground-truth set, all relative to the
    record's last observed position.  Returns ``(report, prediction sets,
    per-sample rows)``.
    """
    idx = evaluation_indices(ds) if idx is None else np.asarray(idx, dtype=int)
    if len(idx) == 0:
        raise ValueError("no records to evaluate")
    groups = ds.groups()
    patches, patch_ids = patch_table(ds)
    rng = np.random.default_rng(seed)
    sets, rows = [], []
    for start in range(0, len(idx), batch_size):
        chunk = idx[start:start + batch_size]
        batch = make_batch(ds, chunk, patches, patch_ids)
        for i, ps in zip(chunk, predict_batch(model, batch, k, strategy, rng)):
            last = ds.positions[i, 7]
            rel = ps.trajectories - last
            gt = ds.relative_futures(groups[ds.keys[i]])
            y = ds.positions[i, 8:]
            rows.append((metrics.ade_min_k(ps.trajectories, y), metrics.fde_min_k(ps.trajectories, y),
                         metrics.precision(rel, gt, r_max), metrics.recall(rel, gt, r_max)))
            sets.append(ps)
    return metrics.summarize(rows, k, r_max), sets, np.array(rows)
