"""Checkpoint directories: ``manifest.json`` plus raw float32 ``params.bin``."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .model import MGGAN, ModelConfig

FORMAT_VERSION = 1


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj):
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def save_checkpoint(model, path, train_config=None):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    tensors, offset, blobs = [], 0, []
    for name, p in model.state_tensors():
        blob = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
        tensors.append({"name": name, "shape": list(p.shape), "dtype": "float32", "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    cfg = {"model": model.config.to_dict(), "train": train_config}
    manifest = {
        "format": FORMAT_VERSION,
        "n_generators": model.config.n_generators,
        "z_dim": model.config.z_dim,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "tensors": tensors,
    }
    (path / "params.bin").write_bytes(b"".join(blobs))
    (path / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                        encoding="utf-8")
    return path


def load_checkpoint(path):
    """Rebuild the model described by a checkpoint; returns ``(model, manifest)``."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    if config_hash(manifest["config"]) != manifest["config_hash"]:
        raise ValueError(f"{path}: config hash does not match manifest contents")
    model = MGGAN(ModelConfig(**manifest["config"]["model"]), seed=0)
    raw = (path / "params.bin").read_bytes()
    params = dict(model.state_tensors())
    names = [t["name"] for t in manifest["tensors"]]
    if names != list(params):
        raise ValueError(f"{path}: tensor list does not match the model architecture")
    for t in manifest["tensors"]:
        p = params[t["name"]]
        if tuple(t["shape"]) != p.shape:
            raise ValueError(f"{path}: tensor {t['name']} has shape {t['shape']}, model expects {p.shape}")
        count = int(np.prod(p.shape))
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=t["offset"])
        p.data[...] = arr.reshape(p.shape).astype(np.float64)
    return model, manifest
