"""Alternating D / C / G / PM-Net training loop and its configuration."""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import losses, nn
from .baselines import build_baseline
from .model import MGGAN, ModelConfig, last_displacement, make_batch, patch_table
from .nn import Adam, Tensor

log = logging.getLogger(__name__)

MODEL_KINDS = ("gan", "gan_l2", "infogan", "mgan", "mg_gan")
LOG_HEADER = "epoch,d_loss,g_adv,g_cl,g_bom,pm_loss"


class ConfigError(ValueError):
    """A training config that does not match the schema."""


@dataclass
class TrainConfig:
    model: str = "mg_gan"
    n_generators: int = 5
    z_dim: int = 8
    code_dim: int = 0
    lambda_traj: float = 1.0
    lambda_cl: float = 1.0
    sigma: float = 1.0
    q: int = 20
    l: int = 1
    batch_size: int = 64
    epochs: int = 20
    lr: float = 1e-3
    seed: int = 0
    data: str | None = None
    out: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"model: unknown kind {self.model!r}")
        for name in ("lambda_traj", "lambda_cl"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be >= 0")
        checks = {"sigma": self.sigma > 0, "q": self.q >= 1, "l": self.l >= 1,
                  "batch_size": self.batch_size >= 1, "epochs": self.epochs >= 0,
                  "n_generators": self.n_generators >= 1, "z_dim": self.z_dim >= 0,
                  "code_dim": self.code_dim >= 0, "lr": self.lr > 0}
        for name, ok in checks.items():
            if not ok:
                raise ConfigError(f"{name}: invalid value {getattr(self, name)!r}")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name: f for f in dataclasses.fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(f"{key}: unknown config key")
        kwargs = {}
        for key, val in doc.items():
            default = known[key].default
            if isinstance(default, bool) or (default is not None and not isinstance(default, str)):
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise ConfigError(f"{key}: expected a number, got {val!r}")
                if isinstance(default, int) and not float(val).is_integer():
                    raise ConfigError(f"{key}: expected an integer, got {val!r}")
                val = type(default)(val)
            elif val is not None and not isinstance(val, str):
                raise ConfigError(f"{key}: expected a string, got {val!r}")
            kwargs[key] = val
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)


# ---------------------------------------------------------------------------


def sample_categorical(pi, n, rng):
    """``n`` draws per row of ``pi`` (B, G) -> (B, n) integer ids."""
    cdf = np.cumsum(pi, axis=-1)
    u = rng.random((pi.shape[0], n)) * cdf[:, -1:]
    ids = (u[:, :, None] >= cdf[:, None, :]).sum(axis=-1)
    return np.minimum(ids, pi.shape[1] - 1)


class TrainData:
    """A dataset with occupancy patches cropped once up front."""

    def __init__(self, ds):
        self.ds = ds
        self.patches, self.patch_ids = patch_table(ds)

    def __len__(self):
        return len(self.ds)

    def batch(self, idx):
        return make_batch(self.ds, idx, self.patches, self.patch_ids)


class Trainer:
    """Holds one Adam state per network and runs alternating D, C, G and PM-Net updates."""

    def __init__(self, model, cfg):
        self.model = model
        self.cfg = cfg
        g = model.groups()
        lr = cfg.lr
        self.opt_d = Adam(g["critic_encoder"] + g["discriminator"], lr)
        self.opt_c = Adam(g["critic_encoder"] + g["classifier"], lr) if "classifier" in g else None
        self.opt_enc = Adam(g["encoder"], lr)
        self.opt_gen = [Adam(g[f"generator{i}"], lr) for i in range(len(model.generators))]
        self.opt_pm = Adam(g["pm"], lr) if "pm" in g else None
        self.uses_code = model.config.code_dim > 0

    # -- helpers
    def _noise(self, n, rng):
        cfg = self.model.config
        z = rng.standard_normal((n, cfg.z_dim))
        codes = None
        if self.uses_code:
            codes = rng.integers(cfg.code_dim, size=n)
            z = np.concatenate([z, np.eye(cfg.code_dim)[codes]], axis=1)
        return z, codes

    def _fake(self, c, batch, rows, ids, rng):
        z, codes = self._noise(len(rows), rng)
        pos = self.model.generate(nn.take_rows(c, rows), ids, z,
                                  last_displacement(batch.obs)[rows], batch.obs[rows, -1])
        return pos, codes

    def _critic_cond(self, batch):
        return self.model.critic.encoder(batch)

    def _relative(self, traj, batch, rows):
        return nn.as_tensor(traj) - Tensor(batch.obs[rows, -1][:, None, :])

    def _zero_all(self):
        self.model.zero_grad()

    # -- the four sub-steps
    def step_discriminator(self, batch, rng):
        model, b = self.model, len(batch)
        rows = np.arange(b)
        with nn.no_grad():
            c = model.encoder(batch)
            ids = sample_categorical(model.pi(c).data, 1, rng)[:, 0]
            fake, codes = self._fake(c, batch, rows, ids, rng)
        self._zero_all()
        cond = self._critic_cond(batch)
        real_f = model.critic.features(cond, rows, batch.fut - batch.obs[:, -1:])
        fake_f = model.critic.features(cond, rows, self._relative(fake.data, batch, rows))
        loss = losses.discriminator_loss(model.critic.discriminate(real_f),
                                         model.critic.discriminate(fake_f))
        _finite(loss, "discriminator step")
        loss.backward()
        self.opt_d.step()
        return float(loss.data), fake.data, ids if codes is None else codes

    def step_classifier(self, batch, fake, labels):
        if self.opt_c is None:
            return 0.0
        model, rows = self.model, np.arange(len(batch))
        self._zero_all()
        cond = self._critic_cond(batch)
        feats = model.critic.features(cond, rows, self._relative(fake, batch, rows))
        loss = losses.classifier_step_loss(model.critic.classify(feats), labels)
        _finite(loss, "classifier step")
        loss.backward()
        self.opt_c.step()
        return float(loss.data)

    def step_generator(self, batch, rng):
        model, cfg = self.model, self.cfg
        b, q = len(batch), cfg.q
        self._zero_all()
        c = model.encoder(batch)
        ids = sample_categorical(model.pi(Tensor(c.data)).data, q, rng)      # (B, q)
        rows = np.repeat(np.arange(b), q)
        fake, codes = self._fake(c, batch, rows, ids.ravel(), rng)
        with nn.no_grad():
            cond = self._critic_cond(batch)
        feats = model.critic.features(cond, rows, self._relative(fake, batch, rows))
        probs = model.critic.discriminate(feats)
        bom, _ = losses.best_of_many_loss(batch.fut, fake.reshape(b, q, *fake.shape[1:]), ids)
        adv = -losses._log_clamped(probs).mean()
        total = adv
        cl_val = 0.0
        if model.critic.cls is not None:
            labels = codes if self.uses_code else ids.ravel()
            weight = 1.0 if self.uses_code else cfg.lambda_cl
            if weight:
                cl = losses.cross_entropy(model.critic.classify(feats), labels)
                cl_val = float(cl.data)
                total = total + weight * cl
        if cfg.lambda_traj:
            total = total + cfg.lambda_traj * bom
        _finite(total, "generator step")
        total.backward()
        self.opt_enc.step()
        used = np.unique(ids)
        for g in used:
            self.opt_gen[g].step()
        return float(adv.data), cl_val, float(bom.data)

    def step_pm(self, batch, rng):
        model, cfg = self.model, self.cfg
        if self.opt_pm is None:
            return 0.0
        b, n_g, l = len(batch), len(model.generators), cfg.l
        with nn.no_grad():
            c = model.encoder(batch)
            rows = np.repeat(np.arange(b), n_g * l)
            ids = np.tile(np.repeat(np.arange(n_g), l), b)
            samples, _ = self._fake(c, batch, rows, ids, rng)
        samples = samples.data.reshape(b, n_g, l, *samples.shape[1:])
        post = losses.pm_log_posterior(losses.pm_log_likelihood(batch.fut, samples, cfg.sigma))
        model.pm_norm.update(c.data)
        self._zero_all()
        loss = losses.pm_loss(post, model.pi(Tensor(c.data)))
        _finite(loss, "PM-Net step")
        loss.backward()
        self.opt_pm.step()
        return float(loss.data)

    def train_epoch(self, data, rng):
        n = len(data)
        if n == 0:
            raise ValueError("cannot train on an empty dataset")
        perm = rng.permutation(n)
        sums = np.zeros(5)
        n_batches = 0
        for start in range(0, n, self.cfg.batch_size):
            batch = data.batch(perm[start:start + self.cfg.batch_size])
            d_loss, fake, labels = self.step_discriminator(batch, rng)
            self.step_classifier(batch, fake, labels)
            g_adv, g_cl, g_bom = self.step_generator(batch, rng)
            pm = self.step_pm(batch, rng)
            sums += (d_loss, g_adv, g_cl, g_bom, pm)
            n_batches += 1
        return dict(zip(("d_loss", "g_adv", "g_cl", "g_bom", "pm_loss"), sums / n_batches))


def _finite(loss, step):
    if not np.all(np.isfinite(loss.data)):
        raise nn.NumericError(f"non-finite loss in the {step}")


def train(cfg, ds, log_path=None, progress=None):
    """Build the configured model and train it for ``cfg.epochs`` epochs."""
    cfg, mc = build_baseline(cfg.model, cfg)
    model = MGGAN(mc, seed=cfg.seed)
    trainer = Trainer(model, cfg)
    data = TrainData(ds)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for epoch in range(cfg.epochs):
        stats = trainer.train_epoch(data, rng)
        rows.append({"epoch": epoch + 1, **stats})
        log.info("epoch %d %s", epoch + 1, " ".join(f"{k}={v:.4f}" for k, v in stats.items()))
        if progress is not None:
            progress(epoch + 1, stats)
    if log_path is not None:
        write_log(rows, log_path)
    return model, rows


def write_log(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(LOG_HEADER + "\n")
        for r in rows:
            fh.write(f"{r['epoch']},{r['d_loss']:.6f},{r['g_adv']:.6f},{r['g_cl']:.6f},"
                     f"{r['g_bom']:.6f},{r['pm_loss']:.6f}\n")


__all__ = ["ConfigError", "ModelConfig", "TrainConfig", "TrainData", "Trainer", "train",
           "sample_categorical", "write_log"]
