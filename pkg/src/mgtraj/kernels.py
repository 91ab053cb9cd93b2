"""Hot-loop kernels: compiled extension when available, pure Python otherwise.

Set ``MGTRAJ_PURE_PYTHON=1`` to force the fallback.  ``BACKEND`` names the
implementation that was selected at import.
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback

_impl = _fallback
BACKEND = "python"
if os.environ.get("MGTRAJ_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback


def manifold_cover(query, ref, radii):
    """Per query trajectory, 1 if at every step some reference point lies within that step's radius."""
    return _impl.manifold_cover(
        np.ascontiguousarray(query, dtype=np.float64),
        np.ascontiguousarray(ref, dtype=np.float64),
        np.ascontiguousarray(radii, dtype=np.float64),
    )


def disc_components(points, radius):
    return int(_impl.disc_components(np.ascontiguousarray(points, dtype=np.float64), float(radius)))


def simulate_episode(blocked, res, pos0, pref_speed, waypoints, wp_start, spawn_step,
                     max_steps, params, search=3):
    return _impl.simulate_episode(
        np.ascontiguousarray(blocked, dtype=np.uint8),
        float(res),
        np.ascontiguousarray(pos0, dtype=np.float64),
        np.ascontiguousarray(pref_speed, dtype=np.float64),
        np.ascontiguousarray(waypoints, dtype=np.float64),
        np.ascontiguousarray(wp_start, dtype=np.int_),
        np.ascontiguousarray(spawn_step, dtype=np.int_),
        int(max_steps),
        np.ascontiguousarray(params, dtype=np.float64),
        int(search),
    )
