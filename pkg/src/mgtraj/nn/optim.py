from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NumericError


@dataclass
class AdamState:
    """Moments for one parameter tensor."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0


@dataclass
class Adam:
    """Bias-corrected Adam over a fixed list of parameters.

    Defaults follow the training setup: lr 1e-3, betas (0.5, 0.999).
    """

    params: list
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    states: list = field(init=False)

    def __post_init__(self):
        self.states = [AdamState(np.zeros_like(p.data), np.zeros_like(p.data)) for p in self.params]

    def step(self):
        for p, st in zip(self.params, self.states):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            adam_step(st, p.data, grad, self.lr, self.beta1, self.beta2, self.eps, name=p.name)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def adam_step(state, param, grad, lr=1e-3, beta1=0.5, beta2=0.999, eps=1e-8, name=None):
    """Apply one Adam update to ``param`` in place and advance ``state``."""
    if param.shape != grad.shape:
        raise ValueError(f"adam_step: parameter {name!r} shape {param.shape} != grad shape {grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"adam_step: non-finite gradient for parameter {name!r}")
    state.t += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * grad
    state.v *= beta2
    state.v += (1.0 - beta2) * grad * grad
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param
