"""Single-step social-force update.

The dataset generator integrates whole episodes inside the compiled kernel;
this module exposes one step of the same dynamics for direct use and for
cross-checking that kernel.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .dataset import SocialForceParams

log = logging.getLogger(__name__)


@dataclass
class Agent:
    position: tuple
    velocity: tuple
    goal: tuple
    preferred_speed: float


def _nearest_blocked(grid, x, y, search=3):
    res = grid.resolution
    r0, c0 = math.floor(y / res), math.floor(x / res)
    best, point = -1.0, None
    for r in range(r0 - search, r0 + search + 1):
        for c in range(c0 - search, c0 + search + 1):
            inside = 0 <= r < grid.height and 0 <= c < grid.width
            if inside and grid.walkable[r, c]:
                continue
            qx = min(max(x, c * res), (c + 1) * res)
            qy = min(max(y, r * res), (r + 1) * res)
            d2 = (x - qx) * (x - qx) + (y - qy) * (y - qy)
            if best < 0.0 or d2 < best:
                best, point = d2, (qx, qy)
    return best, point


def _project_walkable(grid, x, y, margin, search=3):
    res = grid.resolution
    r0, c0 = math.floor(y / res), math.floor(x / res)
    best, point = -1.0, (x, y)
    for r in range(r0 - search, r0 + search + 1):
        for c in range(c0 - search, c0 + search + 1):
            if not (0 <= r < grid.height and 0 <= c < grid.width) or not grid.walkable[r, c]:
                continue
            qx = min(max(x, c * res + margin), (c + 1) * res - margin)
            qy = min(max(y, r * res + margin), (r + 1) * res - margin)
            d2 = (x - qx) * (x - qx) + (y - qy) * (y - qy)
            if best < 0.0 or d2 < best:
                best, point = d2, (qx, qy)
    return point


def forces(agents, grid, params=None):
    """Goal, pairwise and obstacle force on each agent, as an (N, 2) array."""
    p = params or SocialForceParams()
    out = np.zeros((len(agents), 2))
    for i, a in enumerate(agents):
        x, y = a.position
        dx, dy = a.goal[0] - x, a.goal[1] - y
        dist = math.sqrt(dx * dx + dy * dy)
        fx = fy = 0.0
        if dist > 0.0:
            fx = (a.preferred_speed * (dx / dist) - a.velocity[0]) / p.tau
            fy = (a.preferred_speed * (dy / dist) - a.velocity[1]) / p.tau
        for j, b in enumerate(agents):
            if j == i:
                continue
            dx, dy = x - b.position[0], y - b.position[1]
            dist = math.sqrt(dx * dx + dy * dy)
            if dist > 0.0:
                s = p.rep_a * math.exp((p.rep_r - dist) / p.rep_b)
                fx, fy = fx + s * (dx / dist), fy + s * (dy / dist)
        if grid is not None:
            d2, q = _nearest_blocked(grid, x, y)
            if d2 > 0.0:
                dist = math.sqrt(d2)
                s = p.obs_a * math.exp((p.obs_r - dist) / p.obs_b)
                fx, fy = fx + s * ((x - q[0]) / dist), fy + s * ((y - q[1]) / dist)
        out[i] = fx, fy
    return out


def social_force_step(agents, grid, params=None, dt=None):
    """Advance every agent by ``dt`` with semi-implicit Euler and a speed clamp.

    Agents pushed onto a blocked cell are moved back to the nearest walkable
    point and the event is logged.
    """
    p = params or SocialForceParams()
    dt = p.dt if dt is None else dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    acc = forces(agents, grid, p)
    out = []
    for a, (ax, ay) in zip(agents, acc):
        vx, vy = a.velocity[0] + ax * dt, a.velocity[1] + ay * dt
        speed = math.sqrt(vx * vx + vy * vy)
        vmax = p.vmax_factor * a.preferred_speed
        if speed > vmax:
            vx, vy = vx * (vmax / speed), vy * (vmax / speed)
        x, y = a.position[0] + vx * dt, a.position[1] + vy * dt
        if grid is not None and not grid.is_walkable(x, y):
            log.info("agent at (%.3f, %.3f) projected back onto walkable space", x, y)
            x, y = _project_walkable(grid, x, y, p.projection_margin)
        out.append(replace(a, position=(x, y), velocity=(vx, vy)))
    return out
