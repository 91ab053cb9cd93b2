"""Multi-generator network: encoders, attention, generator bank, PM-Net, critic."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .nn import MLP, ConvNet, Linear, LSTMCell, Module, Standardize, Tensor
from .sim.dataset import OBS_LEN, PRED_LEN
from .sim.grid import crop_patch

FEAT = 32


@dataclass
class ModelConfig:
    n_generators: int = 5
    z_dim: int = 8
    code_dim: int = 0          # InfoGAN categorical code size (0 = none)
    pi_mode: str = "learned"   # learned | uniform | single
    enc_hidden: int = 32
    dec_hidden: int = 48
    pm_hidden: int = 48
    critic_hidden: int = 64

    @property
    def n_classes(self):
        return self.code_dim if self.code_dim else self.n_generators

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# batch preparation


@dataclass
class Batch:
    """Model inputs for B records.

    ``patch`` holds U <= B distinct occupancy patches (1 = blocked) and
    ``patch_index`` maps each record to its patch; None means one patch per
    record, in order.
    """

    obs: np.ndarray          # (B, 8, 2)
    patch: np.ndarray        # (U, 1, 32, 32)
    nb_obs: np.ndarray       # (B, N, 8, 2)
    nb_mask: np.ndarray      # (B, N)
    fut: np.ndarray | None = None
    patch_index: np.ndarray | None = None

    def __len__(self):
        return len(self.obs)

    def take(self, idx):
        idx = np.asarray(idx)
        pidx = idx if self.patch_index is None else self.patch_index[idx]
        return Batch(self.obs[idx], self.patch, self.nb_obs[idx], self.nb_mask[idx],
                     None if self.fut is None else self.fut[idx], pidx)


def occupancy_patches(grid, positions):
    walk = np.stack([crop_patch(grid, p) for p in positions])
    return (1.0 - walk.astype(np.float64))[:, None]


def neighbor_tracks(nb_positions):
    """Neighbour observation with gaps filled from the nearest present frame.

    Only neighbours present at the last observed frame are kept.
    """
    nb = np.asarray(nb_positions, dtype=float)[:, :OBS_LEN]
    present = ~np.isnan(nb[:, :, 0])
    mask = present[:, -1].copy()
    out = np.zeros_like(nb)
    for i in np.flatnonzero(mask):
        row = nb[i]
        ok = np.flatnonzero(present[i])
        fill = ok[np.abs(np.arange(OBS_LEN)[:, None] - ok[None, :]).argmin(axis=1)]
        out[i] = row[fill]
    return out[:, None], mask[:, None].astype(np.float64)


def make_batch(ds, idx=None, patches=None, patch_ids=None):
    """Assemble model inputs for records ``idx`` of ``ds``.

    ``patches``/``patch_ids`` are an optional precomputed table of distinct
    patches and each record's entry in it.
    """
    idx = np.arange(len(ds)) if idx is None else np.asarray(idx)
    obs = ds.positions[idx, :OBS_LEN]
    if patches is None:
        patch, pidx = occupancy_patches(ds.grid, obs[:, -1]), None
    else:
        uniq, pidx = np.unique(patch_ids[idx], return_inverse=True)
        patch = patches[uniq]
    nb_obs, nb_mask = neighbor_tracks(ds.neighbors[idx])
    return Batch(obs, patch, nb_obs, nb_mask, ds.positions[idx, OBS_LEN:], pidx)


def patch_table(ds):
    """Distinct occupancy patches of all records and each record's index into them."""
    all_patches = occupancy_patches(ds.grid, ds.positions[:, OBS_LEN - 1])
    flat = all_patches.reshape(len(ds), -1)
    uniq, inv = np.unique(flat, axis=0, return_inverse=True)
    return uniq.reshape(-1, 1, 32, 32), inv.ravel()


# ---------------------------------------------------------------------------
# networks


def _cell_coords(n):
    """(n*n, 2) cell centres in [-1, 1]; rows run along y, columns along x."""
    centers = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    yy, xx = np.meshgrid(centers, centers, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


CELL_COORDS = _cell_coords(8)
# Position channels appended to the occupancy patch, so map features know
# where they sit relative to the pedestrian at the patch centre.
PATCH_COORDS = _cell_coords(32).reshape(32, 32, 2)


def scene_input(patch):
    """(B, 1, 32, 32) occupancy -> (B, 32, 32, 3) NHWC occupancy + x, y channels."""
    occ = np.asarray(patch, dtype=float).reshape(-1, 32, 32, 1)
    return np.concatenate([occ, np.broadcast_to(PATCH_COORDS, (len(occ), 32, 32, 2))], axis=-1)


class Encoder(Module):
    """Dynamics LSTM, CNN + physical attention and social attention -> c = [d, v, s]."""

    def __init__(self, rng, hidden=32):
        self.lstm = LSTMCell(2, hidden, rng)
        self.dyn_proj = Linear(hidden, FEAT, rng)
        self.cnn = ConvNet(rng, in_channels=3)
        self.att_cell = Linear(18, FEAT, rng)
        self.att_dyn = Linear(FEAT, FEAT, rng)
        self.att_score = Linear(FEAT, 1, rng)
        self.phys_proj = Linear(16, FEAT, rng)
        self.soc_score = MLP([4, FEAT, 1], rng)
        self.soc_proj = Linear(FEAT, FEAT, rng)

    def encode_dynamics(self, obs):
        """Final LSTM state over the 7 observed displacements, projected to 32."""
        obs = np.asarray(obs, dtype=float)
        if obs.shape[-2:] != (OBS_LEN, 2):
            raise nn.DimensionError(f"observation must be (..., 8, 2), got {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise nn.NumericError("encode_dynamics: non-finite observation")
        disp = np.diff(obs, axis=1)
        state = self.lstm.zero_state(len(obs))
        for t in range(OBS_LEN - 1):
            state = self.lstm(disp[:, t], state)
        return self.dyn_proj(state[0])

    def physical_attention(self, f, d):
        """Soft attention over the 8x8 scene map ``f`` guided by ``d`` (B, 32).

        ``f`` is the (B, 8, 8, 16) map or its flattened (B, 64, 16) form.  Cell
        coordinates enter the scores only, so the pooled value is a convex
        combination of the map features themselves.
        """
        f = nn.as_tensor(f)
        if f.ndim == 4:
            if f.shape[1:] != (8, 8, 16):
                raise nn.DimensionError(f"physical_attention: map must be (B, 8, 8, 16), got {f.shape}")
            f = f.reshape(f.shape[0], 64, 16)
        if f.ndim != 3 or f.shape[1:] != (64, 16):
            raise nn.DimensionError(f"physical_attention: cells must be (B, 64, 16), got {f.shape}")
        b = f.shape[0]
        if d.shape != (b, FEAT):
            raise nn.DimensionError(f"physical_attention: d has shape {d.shape}, expected ({b}, {FEAT})")
        coords = Tensor(np.broadcast_to(CELL_COORDS, (b, 64, 2)))
        hid = self.att_cell(nn.concat([f, coords], axis=-1).reshape(b * 64, 18)).reshape(b, 64, FEAT)
        hid = nn.tanh(hid + self.att_dyn(d).reshape(b, 1, FEAT))
        scores = self.att_score(hid.reshape(b * 64, FEAT)).reshape(b, 64)
        return self.attend(f, scores)

    def attend(self, f, scores):
        """Softmax over cell ``scores`` (B, 64), pool cells (B, 64, 16), project to 32."""
        b, n, ch = f.shape
        alpha = nn.softmax(scores, axis=-1)
        pooled = (f * alpha.reshape(b, n, 1)).sum(axis=1)
        return self.phys_proj(pooled), alpha

    def social_attention(self, d, nb_d, geom, mask):
        """``nb_d`` (B, N, 32); ``geom`` (B, N, 3) = distance, cos, sin of bearing."""
        b = d.shape[0]
        n = mask.shape[1]
        if n == 0 or not mask.any():
            return Tensor(np.zeros((b, FEAT)))
        dot = (nb_d * d.reshape(b, 1, FEAT)).sum(axis=-1).reshape(b, n, 1)
        feats = nn.concat([Tensor(geom), dot], axis=-1).reshape(b * n, 4)
        scores = self.soc_score(feats).reshape(b, n)
        # masked softmax: absent neighbours get -inf, empty rows are zeroed afterwards
        scores = scores + Tensor(np.where(mask > 0, 0.0, -1e30))
        has_any = mask.max(axis=1, keepdims=True)
        weights = nn.softmax(scores, axis=-1) * Tensor(has_any)
        proj = self.soc_proj(nb_d.reshape(b * n, FEAT)).reshape(b, n, FEAT)
        return (proj * weights.reshape(b, n, 1)).sum(axis=1)

    def __call__(self, batch):
        b = len(batch)
        d = self.encode_dynamics(batch.obs)
        f = self.cnn(scene_input(batch.patch))
        if batch.patch_index is not None:
            f = nn.take_rows(f, batch.patch_index)
        v, _ = self.physical_attention(f, d)
        n = batch.nb_mask.shape[1]
        if n and batch.nb_mask.any():
            nb_d = self.encode_dynamics(batch.nb_obs.reshape(b * n, OBS_LEN, 2)).reshape(b, n, FEAT)
            geom = neighbor_geometry(batch.obs, batch.nb_obs)
            s = self.social_attention(d, nb_d, geom, batch.nb_mask)
        else:
            s = Tensor(np.zeros((b, FEAT)))
        return nn.concat([d, v, s], axis=-1)


def neighbor_geometry(obs, nb_obs):
    """Distance and bearing (relative to the agent's heading) at the last observed step."""
    last = obs[:, -1]
    heading = obs[:, -1] - obs[:, -2]
    rel = nb_obs[:, :, -1] - last[:, None]
    dist = np.linalg.norm(rel, axis=-1)
    ang = np.arctan2(rel[..., 1], rel[..., 0]) - np.arctan2(heading[:, 1], heading[:, 0])[:, None]
    ang = np.pi - np.mod(np.pi - ang, 2 * np.pi)  # wrap to (-pi, pi]
    return np.stack([dist, np.cos(ang), np.sin(ang)], axis=-1)


class Generator(Module):
    """LSTM decoder emitting displacements; each prediction is fed back as the next input."""

    def __init__(self, rng, cond_dim, noise_dim, hidden=48):
        self.init = Linear(cond_dim + noise_dim, hidden, rng)
        self.lstm = LSTMCell(2, hidden, rng)
        self.out = Linear(hidden, 2, rng)

    def __call__(self, c, z, last_disp, last_pos):
        n = c.shape[0]
        h = self.init(nn.concat([c, Tensor(z)], axis=-1))
        state = (h, Tensor(np.zeros_like(h.data)))
        x = Tensor(last_disp)
        pos = Tensor(last_pos)
        out = []
        for _ in range(PRED_LEN):
            state = self.lstm(x, state)
            x = self.out(state[0])
            pos = pos + x
            out.append(pos)
        return nn.stack(out, axis=1) if n else Tensor(np.zeros((0, PRED_LEN, 2)))


class Critic(Module):
    """Shared scene/trajectory encoder with discriminator and classifier heads."""

    def __init__(self, rng, n_classes, hidden=64, enc_hidden=32):
        self.encoder = Encoder(rng, enc_hidden)
        self.traj = MLP([2 * PRED_LEN, FEAT, FEAT], rng)
        self.disc = MLP([3 * FEAT + FEAT, hidden, 1], rng)
        self.cls = MLP([3 * FEAT + FEAT, hidden, n_classes], rng) if n_classes > 1 else None

    def features(self, cond, rows, traj_rel):
        t = nn.leaky_relu(self.traj(nn.as_tensor(traj_rel).reshape(len(rows), 2 * PRED_LEN)))
        return nn.concat([nn.take_rows(cond, rows), t], axis=-1)

    def discriminate(self, feats):
        return nn.sigmoid(self.disc(feats).reshape(feats.shape[0]))

    def classify(self, feats):
        return nn.softmax(self.cls(feats), axis=-1)

    def classify_log(self, feats):
        return nn.log_softmax(self.cls(feats), axis=-1)


class MGGAN(Module):
    def __init__(self, config=None, seed=0):
        self.config = config or ModelConfig()
        cfg = self.config
        if cfg.pi_mode == "learned" and not 2 <= cfg.n_generators <= 8:
            raise ValueError("n_generators must lie in [2, 8] with a learned PM-Net")
        rng = np.random.default_rng(seed)
        self.encoder = Encoder(rng, cfg.enc_hidden)
        noise = cfg.z_dim + cfg.code_dim
        self.generators = [Generator(rng, 3 * FEAT, noise, cfg.dec_hidden)
                           for _ in range(cfg.n_generators)]
        learned = cfg.pi_mode == "learned"
        self.pm = MLP([3 * FEAT, cfg.pm_hidden, cfg.pm_hidden, cfg.n_generators], rng,
                      activation="relu") if learned else None
        # PM-Net sees c standardized with running statistics; the scene part of c
        # varies by ~1e-2 across records, too little for Adam at lr 1e-3 to pick up
        self.pm_norm = Standardize(3 * FEAT) if learned else None
        self.critic = Critic(rng, cfg.n_classes, cfg.critic_hidden, cfg.enc_hidden)

    # parameter groups, each with its own optimizer state
    def groups(self):
        out = {"encoder": self.encoder.parameters()}
        for g, gen in enumerate(self.generators):
            out[f"generator{g}"] = gen.parameters()
        if self.pm is not None:
            out["pm"] = self.pm.parameters()
        out["critic_encoder"] = self.critic.encoder.parameters() + self.critic.traj.parameters()
        out["discriminator"] = self.critic.disc.parameters()
        if self.critic.cls is not None:
            out["classifier"] = self.critic.cls.parameters()
        return out

    def pi(self, c):
        """Categorical distribution over generators, (B, n_G)."""
        b = c.shape[0]
        n = self.config.n_generators
        if self.pm is None:
            return Tensor(np.full((b, n), 1.0 / n))
        return nn.softmax(self.pm(self.pm_norm(c)), axis=-1)

    def generate(self, c, gen_ids, z, last_disp, last_pos):
        """Run each sample through its own generator; outputs keep the input order."""
        gen_ids = np.asarray(gen_ids)
        if gen_ids.size and (gen_ids.min() < 0 or gen_ids.max() >= len(self.generators)):
            raise IndexError(f"generator index out of range [0, {len(self.generators)})")
        parts, order = [], []
        for g in range(len(self.generators)):
            idx = np.flatnonzero(gen_ids == g)
            if idx.size == 0:
                continue
            parts.append(self.generators[g](nn.take_rows(c, idx), z[idx], last_disp[idx], last_pos[idx]))
            order.append(idx)
        if not parts:
            return Tensor(np.zeros((0, PRED_LEN, 2)))
        order = np.concatenate(order)
        return nn.take_rows(nn.concat(parts, axis=0), np.argsort(order, kind="stable"))

    def decode(self, g, c, z, last_disp, last_pos):
        if not 0 <= g < len(self.generators):
            raise IndexError(f"invalid generator index {g}")
        return self.generators[g](c, z, last_disp, last_pos)


def last_displacement(obs):
    return obs[:, -1] - obs[:, -2]
