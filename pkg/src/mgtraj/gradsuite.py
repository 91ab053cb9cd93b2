"""Finite-difference checks of every autodiff primitive and of the composite training losses.

Used by ``mgtraj grad-check`` and by the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses, nn
from .model import MGGAN, Batch, ModelConfig, last_displacement
from .nn import Tensor, conv2d, grad_check, lstm_cell, maxpool2d

PRIMITIVE_TOL = 1e-6
COMPOSITE_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    error: float
    tol: float

    @property
    def passed(self):
        return self.error < self.tol


def _param(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _weights(rng, shape):
    # random projection so every output entry contributes to the scalar
    return Tensor(rng.normal(size=shape))


def _linear(rng):
    x, w, b = _param(rng, 3, 4), _param(rng, 4, 2), _param(rng, 2)
    r = _weights(rng, (3, 2))
    return lambda: (nn.linear(x, w, b) * r).sum(), [x, w, b]


def _lstm(rng):
    x, h, c = _param(rng, 2, 3), _param(rng, 2, 4), _param(rng, 2, 4)
    w_ih, w_hh, b = _param(rng, 3, 16), _param(rng, 4, 16), _param(rng, 16)
    r1, r2 = _weights(rng, (2, 4)), _weights(rng, (2, 4))

    def fn():
        h2, c2 = lstm_cell(x, h, c, w_ih, w_hh, b)
        return (h2 * r1).sum() + (c2 * r2).sum()

    return fn, [x, h, c, w_ih, w_hh, b]


def _conv(rng):
    x, w, b = _param(rng, 1, 4, 4, 2), _param(rng, 3, 2, 3, 3), _param(rng, 3)
    r = _weights(rng, (1, 4, 4, 3))
    return lambda: (conv2d(x, w, b) * r).sum(), [x, w, b]


def _pool(rng):
    # distinct, well-separated values so no finite-difference step crosses a tie
    data = rng.permutation(32).reshape(1, 4, 4, 2) * 0.1 + rng.normal(size=(1, 4, 4, 2)) * 1e-3
    x = Tensor(data, requires_grad=True)
    r = _weights(rng, (1, 2, 2, 2))
    return lambda: (maxpool2d(x) * r).sum(), [x]


def _elementwise(op, positive=False):
    def build(rng):
        data = np.abs(rng.normal(size=5)) + 0.5 if positive else rng.normal(size=5)
        x = Tensor(data, requires_grad=True)
        r = _weights(rng, 5)
        return lambda: (op(x) * r).sum(), [x]
    return build


def _softmax(rng):
    x, r = _param(rng, 2, 4), _weights(rng, (2, 4))
    return lambda: (nn.softmax(x) * r).sum(), [x]


def _log_softmax(rng):
    x, r = _param(rng, 2, 4), _weights(rng, (2, 4))
    return lambda: (nn.log_softmax(x) * r).sum(), [x]


def _norm(rng):
    x, r = _param(rng, 3, 2), _weights(rng, 3)
    return lambda: (nn.norm(x) * r).sum(), [x]


def _gather(rng):
    x, r = _param(rng, 4, 3), _weights(rng, (6, 3))
    idx = np.array([0, 2, 2, 3, 0, 1])
    return lambda: (nn.take_rows(x, idx) * r).sum(), [x]


def _structure(rng):
    a, b = _param(rng, 2, 3), _param(rng, 2, 3)
    r = _weights(rng, (3, 4))

    def fn():
        cat = nn.concat([a, b], axis=0)
        stacked = nn.stack([a, b], axis=1).reshape(2, 6)
        return (nn.transpose(cat) * r).sum() + (stacked * stacked).sum() * 0.1 + (a / (b * b + 1.0)).sum()

    return fn, [a, b]


PRIMITIVES = {
    "linear": _linear, "lstm_cell": _lstm, "conv2d": _conv, "maxpool2d": _pool,
    "sigmoid": _elementwise(nn.sigmoid), "tanh": _elementwise(nn.tanh),
    "leaky_relu": _elementwise(nn.leaky_relu), "exp": _elementwise(nn.exp),
    "log": _elementwise(nn.log, positive=True), "sqrt": _elementwise(nn.sqrt, positive=True),
    "softmax": _softmax, "log_softmax": _log_softmax, "norm": _norm, "take_rows": _gather,
    "concat/stack/transpose/div": _structure,
}

SLOW = {"conv2d", "lstm_cell"}


def check_primitive(name, seeds):
    build = PRIMITIVES[name]
    worst = 0.0
    for s in seeds:
        fn, params = build(np.random.default_rng(s))
        worst = max(worst, grad_check(fn, params))
    return CheckResult(name, worst, PRIMITIVE_TOL)


# ---------------------------------------------------------------------------
# composite losses through a small model


def _toy_batch(rng, b=2):
    steps = np.arange(8)[:, None] * np.array([0.35, 0.45])
    obs = rng.normal(0, 0.05, (b, 8, 2)) + steps + rng.uniform(5, 10, (b, 1, 2))
    patch = (rng.random((b, 1, 32, 32)) < 0.3).astype(float)
    nb_obs = obs[:, None] + rng.normal(0, 1.5, (b, 1, 1, 2))
    fut = obs[:, -1:] + np.arange(1, 13)[:, None] * np.array([0.3, 0.5]) + rng.normal(0, 0.2, (b, 12, 2))
    return Batch(obs, patch, nb_obs, np.ones((b, 1)), fut)


def _small_model(seed):
    cfg = ModelConfig(n_generators=2, z_dim=2, enc_hidden=3, dec_hidden=3, pm_hidden=3, critic_hidden=3)
    return MGGAN(cfg, seed=seed)


def composite_cases(seed=0):
    """(name, fn, params) for each composite loss of the training loop."""
    rng = np.random.default_rng(seed)
    model = _small_model(seed)
    batch = _toy_batch(rng)
    b, q = len(batch), 3
    rows = np.repeat(np.arange(b), q)
    ids = np.tile([0, 1, 1], b)
    z = rng.normal(size=(b * q, model.config.z_dim))
    last = batch.obs[:, -1]
    real_rel = batch.fut - last[:, None]

    def fake():
        c = model.encoder(batch)
        return model.generate(nn.take_rows(c, rows), ids, z, last_displacement(batch.obs)[rows], last[rows])

    def critic_feats(traj):
        cond = model.critic.encoder(batch)
        return model.critic.features(cond, rows, nn.as_tensor(traj) - Tensor(last[rows][:, None]))

    def generator_loss():
        pos = fake()
        feats = critic_feats(pos)
        bom, _ = losses.best_of_many_loss(batch.fut, pos.reshape(b, q, 12, 2), ids.reshape(b, q))
        return losses.generator_step_loss(model.critic.discriminate(feats), model.critic.classify(feats),
                                          ids, bom)

    with nn.no_grad():
        fixed_fake = fake().data

    def discriminator_loss():
        cond = model.critic.encoder(batch)
        real = model.critic.features(cond, np.arange(b), real_rel)
        return losses.discriminator_loss(model.critic.discriminate(real),
                                         model.critic.discriminate(critic_feats(fixed_fake)))

    def classifier_loss():
        return losses.classifier_step_loss(model.critic.classify(critic_feats(fixed_fake)), ids)

    samples = batch.fut[:, None, None] + rng.normal(0, 0.3, (b, 2, 1, 12, 2))
    post = losses.pm_log_posterior(losses.pm_log_likelihood(batch.fut, samples))
    with nn.no_grad():
        cond = Tensor(model.encoder(batch).data)

    def pm_loss():
        return losses.pm_loss(post, model.pi(cond))

    g = model.groups()
    enc_part = [model.encoder.phys_proj.bias, model.encoder.soc_proj.bias, model.encoder.dyn_proj.bias,
                model.encoder.att_score.weight]
    return [
        ("generator loss", generator_loss, g["generator0"] + g["generator1"] + enc_part),
        ("discriminator loss", discriminator_loss, g["discriminator"] + [model.critic.encoder.dyn_proj.weight]),
        ("classifier loss", classifier_loss, g["classifier"]),
        ("PM-Net loss", pm_loss, g["pm"]),
    ]


def run(primitive_seeds=100, slow_seeds=20, composite_seed=0, progress=None):
    """Run the full suite; returns a list of :class:`CheckResult`."""
    results = []
    for name in PRIMITIVES:
        n = slow_seeds if name in SLOW else primitive_seeds
        results.append(check_primitive(name, range(n)))
        if progress:
            progress(results[-1])
    for name, fn, params in composite_cases(composite_seed):
        for p in params:
            p.requires_grad = True
        results.append(CheckResult(name, grad_check(fn, params), COMPOSITE_TOL))
        if progress:
            progress(results[-1])
    return results
