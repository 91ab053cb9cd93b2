"""Comparison models expressed as wirings of the shared model and trainer."""
from __future__ import annotations

import dataclasses

from .losses import infogan_code_loss
from .model import ModelConfig

INFOGAN_CODE = 3


def build_baseline(kind, base):
    """Return ``(train_config, model_config)`` for a baseline ``kind``.

    ``base`` is a :class:`~mgtraj.training.TrainConfig`; only the fields a
    kind pins are overridden.
    """
    n_g = base.n_generators
    if kind == "gan":
        cfg = dataclasses.replace(base, model=kind, n_generators=1, lambda_traj=0.0, lambda_cl=0.0,
                                  code_dim=0)
        mc = ModelConfig(n_generators=1, z_dim=base.z_dim, pi_mode="single")
    elif kind == "gan_l2":
        cfg = dataclasses.replace(base, model=kind, n_generators=1, lambda_traj=1.0, lambda_cl=0.0,
                                  code_dim=0)
        mc = ModelConfig(n_generators=1, z_dim=base.z_dim, pi_mode="single")
    elif kind == "infogan":
        cfg = dataclasses.replace(base, model=kind, n_generators=1, code_dim=INFOGAN_CODE)
        mc = ModelConfig(n_generators=1, z_dim=base.z_dim, code_dim=INFOGAN_CODE, pi_mode="single")
    elif kind == "mgan":
        if n_g < 2:
            raise ValueError("mgan needs at least two generators")
        cfg = dataclasses.replace(base, model=kind, lambda_traj=1.0, code_dim=0)
        mc = ModelConfig(n_generators=n_g, z_dim=base.z_dim, pi_mode="uniform")
    elif kind == "mg_gan":
        if n_g < 2:
            raise ValueError("mg_gan needs at least two generators")
        cfg = dataclasses.replace(base, model=kind, code_dim=0)
        mc = ModelConfig(n_generators=n_g, z_dim=base.z_dim, pi_mode="learned")
    else:
        raise ValueError(f"unknown baseline kind {kind!r}")
    return cfg, mc


__all__ = ["INFOGAN_CODE", "build_baseline", "infogan_code_loss"]
