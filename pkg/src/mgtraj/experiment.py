"""Experiment manifests: which data, config, seed and checkpoint produced an artifact."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .checkpoint import config_hash

MANIFEST_NAME = "experiment.json"


def content_hash(path):
    """sha256 over the files of ``path`` (a file or a directory), in sorted name order.

    Experiment manifests are skipped so writing one does not change the hash
    of the directory it describes.
    """
    path = Path(path)
    files = [path] if path.is_file() else sorted(p for p in path.rglob("*") if p.is_file())
    h = hashlib.sha256()
    for f in files:
        if f.name == MANIFEST_NAME:
            continue
        h.update(f.relative_to(path).as_posix().encode() if f != path else f.name.encode())
        h.update(b"\0")
        with open(f, "rb") as fh:
            for block in iter(lambda: fh.read(1 << 20), b""):
                h.update(block)
    return h.hexdigest()


@dataclass
class ExperimentManifest:
    command: str
    config_hash: str
    seed: int
    dataset_path: str
    dataset_hash: str
    checkpoint_path: str | None = None
    version: str = __version__

    @classmethod
    def create(cls, command, config, seed, dataset_path, checkpoint_path=None):
        return cls(command, config_hash(config), int(seed), str(dataset_path), content_hash(dataset_path),
                   None if checkpoint_path is None else str(checkpoint_path))

    def write(self, out_dir):
        out = Path(out_dir) / MANIFEST_NAME
        out.write_text(json.dumps(asdict(self), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return out

    @classmethod
    def read(cls, path):
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        return cls(**json.loads(path.read_text(encoding="utf-8")))
