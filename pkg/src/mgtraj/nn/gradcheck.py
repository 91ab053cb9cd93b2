from __future__ import annotations

import numpy as np

from .tensor import no_grad


def grad_check(function, params, fd_step=1e-5):
    """Compare backward-pass gradients of a scalar ``function()`` with central differences.

    ``params`` are leaf tensors that require a gradient; ``function`` must
    rebuild its graph from them on every call.  Returns the largest
    ``|g_ad - g_fd| / max(1, |g_fd|)`` over every entry of every parameter.
    """
    for p in params:
        p.grad = None
    out = function()
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    with no_grad():
        for p, g_ad in zip(params, analytic):
            flat = p.data.reshape(-1)
            g_flat = g_ad.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + fd_step
                plus = function().item()
                flat[i] = orig - fd_step
                minus = function().item()
                flat[i] = orig
                g_fd = (plus - minus) / (2.0 * fd_step)
                err = abs(g_flat[i] - g_fd) / max(1.0, abs(g_fd))
                worst = max(worst, err)
    return worst
