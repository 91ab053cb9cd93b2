"""Layer primitives with hand-written backward passes, plus parameter containers."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import (
    DTYPE,
    DimensionError,
    Tensor,
    _accumulate,
    _make,
    grad_enabled,
    as_tensor,
    leaky_relu,
    linear,
    relu,
)

# ---------------------------------------------------------------------------
# fused primitives


def _gates_forward(pre, c):
    """Activate ``[i, f, g, o]`` pre-activations with a single tanh pass over the block."""
    hid = c.shape[1]
    gates = np.tanh(pre * np.repeat([0.5, 0.5, 1.0, 0.5], hid))
    gates[:, :2 * hid] = 0.5 * gates[:, :2 * hid] + 0.5
    gates[:, 3 * hid:] = 0.5 * gates[:, 3 * hid:] + 0.5
    gi, gf, gg, go = (gates[:, k * hid:(k + 1) * hid] for k in range(4))
    c_new = gf * c + gi * gg
    tc = np.tanh(c_new)
    return gates, np.concatenate([go * tc, c_new], axis=1), tc


def _gates_backward(gates, c, tc, ghc):
    hid = c.shape[1]
    gi, gf, gg, go = (gates[:, k * hid:(k + 1) * hid] for k in range(4))
    dh = ghc[:, :hid]
    dc = ghc[:, hid:] + dh * go * (1.0 - tc * tc)
    dpre = np.concatenate([dc * gg * gi * (1.0 - gi), dc * c * gf * (1.0 - gf),
                           dc * gi * (1.0 - gg * gg), dh * tc * go * (1.0 - go)], axis=1)
    return dpre, dc * gf


def lstm_cell(x, h, c, w_ih, w_hh, bias):
    """One LSTM step. Gate layout along the last axis is ``[i, f, g, o]``.

    ``x`` is (B, n_in), ``h``/``c`` are (B, n_hidden), ``w_ih`` is
    (n_in, 4H), ``w_hh`` is (H, 4H) and ``bias`` is (4H,).
    """
    x, h, c = as_tensor(x), as_tensor(h), as_tensor(c)
    hidden = w_hh.shape[0]
    if x.shape[-1] != w_ih.shape[0] or h.shape[-1] != hidden or c.shape[-1] != hidden:
        raise DimensionError(
            f"lstm_cell: x {x.shape}, h {h.shape}, c {c.shape} vs w_ih {w_ih.shape}, w_hh {w_hh.shape}"
        )
    pre = x.data @ w_ih.data + h.data @ w_hh.data + bias.data
    gates, hc, tc = _gates_forward(pre, c.data)

    def backward(ghc):
        dpre, dc_prev = _gates_backward(gates, c.data, tc, ghc)
        if w_ih.requires_grad:
            _accumulate(w_ih, x.data.T @ dpre)
        if w_hh.requires_grad:
            _accumulate(w_hh, h.data.T @ dpre)
        if bias.requires_grad:
            _accumulate(bias, dpre.sum(axis=0))
        if x.requires_grad:
            _accumulate(x, dpre @ w_ih.data.T)
        if h.requires_grad:
            _accumulate(h, dpre @ w_hh.data.T)
        if c.requires_grad:
            _accumulate(c, dc_prev)

    node = _make(hc, (x, h, c, w_ih, w_hh, bias), backward)
    return split_cols(node, hidden)


def split_cols(a, at):
    """Split the last axis at ``at`` into two tensors."""
    data = a.data
    left, right = data[..., :at], data[..., at:]
    if not (grad_enabled() and a.requires_grad):
        return Tensor(left), Tensor(right)

    def make(sl):
        def backward(g):
            full = np.zeros_like(data)
            full[..., sl] = g
            _accumulate(a, full)
        return backward

    return (
        Tensor(left, requires_grad=True, _parents=(a,), _backward=make(slice(None, at))),
        Tensor(right, requires_grad=True, _parents=(a,), _backward=make(slice(at, None))),
    )


def _im2col(x, k=3):
    """(B, H, W, C) -> (B*H*W, k*k*C) patch matrix for a same-padded k x k window."""
    b, hgt, wid, ch = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))        # (B, H, W, C, k, k)
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(b * hgt * wid, k * k * ch)


def conv2d(x, weight, bias):
    """Same-padded 2-D convolution on channels-last input (B, H, W, C); weight (F, C, k, k)."""
    x = as_tensor(x)
    f, ch, k, _ = weight.shape
    if x.ndim != 4 or x.shape[3] != ch:
        raise DimensionError(f"conv2d: input {x.shape} incompatible with weight {weight.shape}")
    b, hgt, wid, _ = x.shape
    cols = _im2col(x.data, k)
    wmat = weight.data.transpose(0, 2, 3, 1).reshape(f, -1)     # (F, k*k*C)
    out = (cols @ wmat.T + bias.data).reshape(b, hgt, wid, f)

    def backward(g):
        g2 = g.reshape(-1, f)
        if weight.requires_grad:
            _accumulate(weight, (g2.T @ cols).reshape(f, k, k, ch).transpose(0, 3, 1, 2))
        if bias.requires_grad:
            _accumulate(bias, g2.sum(axis=0))
        if x.requires_grad:
            # the input gradient is a same-padded convolution with the flipped kernel
            flipped = weight.data[:, :, ::-1, ::-1].transpose(1, 2, 3, 0).reshape(ch, -1)
            gx = _im2col(g.reshape(b, hgt, wid, f), k) @ flipped.T
            _accumulate(x, gx.reshape(b, hgt, wid, ch))

    return _make(out, (x, weight, bias), backward)


def maxpool2d(x):
    """2x2 max-pool with stride 2 on (B, H, W, C); ties route the gradient to the first maximum
    in the order top-left, top-right, bottom-left, bottom-right."""
    b, hgt, wid, ch = x.shape
    if hgt % 2 or wid % 2:
        raise DimensionError(f"maxpool2d needs even spatial dims, got {x.shape}")
    quads = [(0, 0), (0, 1), (1, 0), (1, 1)]
    parts = [x.data[:, i::2, j::2] for i, j in quads]
    out = np.maximum(np.maximum(parts[0], parts[1]), np.maximum(parts[2], parts[3]))

    def backward(g):
        full = np.zeros_like(x.data)
        taken = np.zeros(out.shape, dtype=bool)
        for (i, j), part in zip(quads, parts):
            hit = (part == out) & ~taken
            taken |= hit
            full[:, i::2, j::2] = g * hit
        _accumulate(x, full)

    return _make(out, (x,), backward)


# ---------------------------------------------------------------------------
# parameter containers


class Module:
    """Holds named parameters and sub-modules in registration order."""

    def named_parameters(self, prefix=""):
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{key}.")
            elif isinstance(val, (list, tuple)) and val and isinstance(val[0], Module):
                for i, m in enumerate(val):
                    yield from m.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix=""):
        """Non-trainable state tensors (``requires_grad`` off), in registration order."""
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and not val.requires_grad:
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_buffers(f"{prefix}{key}.")
            elif isinstance(val, (list, tuple)) and val and isinstance(val[0], Module):
                for i, m in enumerate(val):
                    yield from m.named_buffers(f"{prefix}{key}.{i}.")

    def state_tensors(self):
        """Parameters followed by buffers: everything a checkpoint has to store."""
        return list(self.named_parameters()) + list(self.named_buffers())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def zero_(self):
        for p in self.parameters():
            p.data[...] = 0.0


def _param(rng, shape, bound, name):
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)


class Linear(Module):
    def __init__(self, n_in, n_out, rng):
        bound = 1.0 / np.sqrt(n_in)
        self.weight = _param(rng, (n_in, n_out), bound, "weight")
        self.bias = _param(rng, (n_out,), bound, "bias")

    def __call__(self, x):
        return linear(x, self.weight, self.bias)


class Standardize(Module):
    """Fixed affine input scaling ``(x - mean) / sqrt(var + eps)`` from running statistics.

    The statistics are buffers, not parameters: :meth:`update` folds in a
    batch (a plain average for the first ``1 / momentum`` batches, then an
    exponential one) and the forward pass treats them as constants.  Before
    the first update it is the identity.
    """

    def __init__(self, n, momentum=0.01, eps=1e-5):
        self.mean = Tensor(np.zeros(n, dtype=DTYPE), name="mean")
        self.var = Tensor(np.ones(n, dtype=DTYPE), name="var")
        self.count = Tensor(np.zeros(1, dtype=DTYPE), name="count")
        self.momentum = momentum
        self.eps = eps

    def update(self, x):
        x = np.asarray(x, dtype=DTYPE).reshape(-1, self.mean.shape[0])
        if len(x) == 0:
            return
        n = self.count.data[0]
        rate = max(1.0 / (n + 1.0), self.momentum)
        mean, sq = self.mean.data, self.var.data + self.mean.data ** 2
        if n == 0:
            mean, sq = np.zeros_like(mean), np.zeros_like(sq)
        mean = (1.0 - rate) * mean + rate * x.mean(axis=0)
        sq = (1.0 - rate) * sq + rate * (x * x).mean(axis=0)
        self.mean.data[...] = mean
        self.var.data[...] = np.maximum(sq - mean ** 2, 0.0)
        self.count.data[0] = n + 1.0

    def __call__(self, x):
        scale = 1.0 / np.sqrt(self.var.data + self.eps)
        return (as_tensor(x) - Tensor(self.mean.data.copy())) * Tensor(scale)


class MLP(Module):
    """Stack of linear layers with an activation between (not after) them."""

    def __init__(self, sizes, rng, activation="leaky_relu"):
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.activation = activation

    def __call__(self, x):
        act = relu if self.activation == "relu" else leaky_relu
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = act(x)
        return x


class LSTMCell(Module):
    def __init__(self, n_in, hidden, rng):
        bound = 1.0 / np.sqrt(hidden)
        self.hidden = hidden
        self.w_ih = _param(rng, (n_in, 4 * hidden), bound, "w_ih")
        self.w_hh = _param(rng, (hidden, 4 * hidden), bound, "w_hh")
        self.bias = _param(rng, (4 * hidden,), bound, "bias")

    def __call__(self, x, state):
        h, c = state
        return lstm_cell(x, h, c, self.w_ih, self.w_hh, self.bias)

    def zero_state(self, batch):
        z = np.zeros((batch, self.hidden), dtype=DTYPE)
        return Tensor(z), Tensor(z.copy())


class ConvNet(Module):
    """Two (conv 3x3 -> ReLU -> 2x2 max-pool) stages: a 32x32 patch -> (B, 8, 8, 16).

    Single-channel patches may come as (B, 1, 32, 32) or (B, 32, 32, 1);
    multi-channel input must be NHWC, (B, 32, 32, in_channels).
    """

    def __init__(self, rng, channels=16, in_channels=1):
        # He-uniform bounds: ReLU halves the variance at each stage
        b1 = np.sqrt(6.0 / (in_channels * 9))
        b2 = np.sqrt(6.0 / (channels * 9))
        self.in_channels = in_channels
        self.w1 = _param(rng, (channels, in_channels, 3, 3), b1, "w1")
        self.b1 = _param(rng, (channels,), b1, "b1")
        self.w2 = _param(rng, (channels, channels, 3, 3), b2, "w2")
        self.b2 = _param(rng, (channels,), b2, "b2")

    def __call__(self, patch):
        patch = as_tensor(patch)
        k = self.in_channels
        shapes = ((1, 32, 32), (32, 32, 1)) if k == 1 else ((32, 32, k),)
        if patch.ndim != 4 or patch.shape[1:] not in shapes:
            want = " or ".join(f"(B, {a}, {b}, {c})" for a, b, c in shapes)
            raise DimensionError(f"ConvNet expects {want} patches, got {patch.shape}")
        x = patch.reshape(patch.shape[0], 32, 32, k)      # one channel: NCHW == NHWC
        x = maxpool2d(relu(conv2d(x, self.w1, self.b1)))
        return maxpool2d(relu(conv2d(x, self.w2, self.b2)))
