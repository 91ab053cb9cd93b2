"""Loss terms of the adversarial, best-of-many, classifier and PM-Net objectives."""
from __future__ import annotations

import logging
import math

import numpy as np

from . import nn
from .nn import Tensor

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


def pm_likelihood(y, samples, sigma=1.0):
    """Unnormalised ``p(Y | c, g)`` per generator by averaging over ``l`` noise draws.

    ``samples`` has shape (n_G, l, 12, 2) and ``y`` (12, 2); leading batch
    dimensions on both are broadcast.
    """
    samples = np.asarray(samples, dtype=float)
    if not np.all(np.isfinite(samples)):
        raise nn.NumericError("pm_likelihood: non-finite generator sample")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    y = np.asarray(y, dtype=float)[..., None, None, :, :]
    sq = ((samples - y) ** 2).sum(axis=(-1, -2))
    return np.exp(-sq / (2.0 * sigma)).mean(axis=-1)


def pm_log_likelihood(y, samples, sigma=1.0):
    """Log of :func:`pm_likelihood`, computed without underflow."""
    samples = np.asarray(samples, dtype=float)
    if not np.all(np.isfinite(samples)):
        raise nn.NumericError("pm_log_likelihood: non-finite generator sample")
    y = np.asarray(y, dtype=float)[..., None, None, :, :]
    a = -((samples - y) ** 2).sum(axis=(-1, -2)) / (2.0 * sigma)
    top = a.max(axis=-1, keepdims=True)
    return top[..., 0] + np.log(np.exp(a - top).mean(axis=-1))


def pm_posterior(likelihoods):
    """Bayes posterior over generators under a uniform prior."""
    lik = np.asarray(likelihoods, dtype=float)
    if np.any(lik < 0) or not np.all(np.isfinite(lik)):
        raise ValueError("likelihoods must be finite and non-negative")
    total = lik.sum(axis=-1, keepdims=True)
    zero = total[..., 0] == 0
    if np.any(zero):
        log.info("pm_posterior: %d all-zero likelihood vectors, using a uniform posterior",
                 int(np.sum(zero)))
    uniform = np.full_like(lik, 1.0 / lik.shape[-1])
    return np.where(total > 0, lik / np.where(total > 0, total, 1.0), uniform)


def pm_log_posterior(log_likelihoods):
    """Posterior from log-likelihoods; equal to :func:`pm_posterior` of their exponentials."""
    a = np.asarray(log_likelihoods, dtype=float)
    a = a - a.max(axis=-1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=-1, keepdims=True)


def pm_loss(posterior, pi):
    """Cross entropy ``H(p, pi)`` averaged over leading dimensions; ``pi`` may be a Tensor."""
    p = np.asarray(posterior, dtype=float)
    pi = nn.as_tensor(pi)
    logpi = nn.log(nn.clip(pi, PROB_FLOOR, 1.0))
    ce = -(logpi * Tensor(p)).sum(axis=-1)
    return ce.mean()


def trajectory_distance(pred, y):
    """Mean-over-steps L2 distance, for numpy inputs of shape (..., 12, 2)."""
    return np.linalg.norm(np.asarray(pred) - np.asarray(y), axis=-1).mean(axis=-1)


def best_of_many_loss(y, predictions, generator_ids):
    """Best-of-many L2 over ``q`` candidates per ground truth.

    ``predictions`` is a Tensor (B, q, 12, 2), ``y`` (B, 12, 2),
    ``generator_ids`` (B, q).  Only the closest candidate of each row enters
    the loss, so all other samples receive exactly zero gradient.  Returns
    the batch-mean loss and the generator id of each row's closest sample.
    """
    predictions = nn.as_tensor(predictions)
    y = np.asarray(y, dtype=float)
    if predictions.ndim == 3:
        predictions = predictions.reshape(1, *predictions.shape)
        y = y[None]
        generator_ids = np.asarray(generator_ids)[None]
    b, q = predictions.shape[:2]
    dist = trajectory_distance(predictions.data, y[:, None])
    best = dist.argmin(axis=1)
    chosen = nn.take_rows(predictions.reshape(b * q, *predictions.shape[2:]), np.arange(b) * q + best)
    err = nn.norm(chosen - Tensor(y), axis=-1).mean(axis=-1)
    return err.mean(), np.asarray(generator_ids)[np.arange(b), best]


def _log_clamped(p):
    return nn.log(nn.clip(nn.as_tensor(p), PROB_FLOOR, 1.0))


def discriminator_loss(real_probs, fake_probs):
    """``-mean ln D(real) - mean ln(1 - D(fake))`` with probabilities clamped to [1e-12, 1]."""
    real = nn.as_tensor(real_probs)
    fake = nn.as_tensor(fake_probs)
    return -_log_clamped(real).mean() - _log_clamped(1.0 - fake).mean()


def cross_entropy(probs, labels):
    """Mean ``-ln p[label]`` of a (N, C) probability Tensor."""
    probs = nn.as_tensor(probs)
    labels = np.asarray(labels, dtype=int)
    onehot = np.zeros(probs.shape)
    onehot[np.arange(len(labels)), labels] = 1.0
    return -(_log_clamped(probs) * Tensor(onehot)).sum(axis=-1).mean()


def generator_step_loss(fake_probs, class_probs, generator_ids, bom, lambda_cl=1.0, lambda_traj=1.0):
    """Non-saturating adversarial term plus weighted classifier and best-of-many terms."""
    loss = -_log_clamped(fake_probs).mean()
    if lambda_cl and class_probs is not None:
        loss = loss + lambda_cl * cross_entropy(class_probs, generator_ids)
    if lambda_traj:
        loss = loss + lambda_traj * nn.as_tensor(bom)
    return loss


def classifier_step_loss(class_probs, generator_ids):
    return cross_entropy(class_probs, generator_ids)


def infogan_code_loss(code_probs, codes):
    """Cross entropy between the mutual-information head and the sampled categorical code."""
    codes = np.asarray(codes)
    if codes.ndim == 2:
        codes = codes.argmax(axis=-1)
    return cross_entropy(code_probs, codes)


LN2 = math.log(2.0)
