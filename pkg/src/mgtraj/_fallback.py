"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

The arithmetic mirrors the compiled code operation for operation so both
backends return identical bits.
"""
from __future__ import annotations

import math

import numpy as np


def manifold_cover(query, ref, radii):
    query = np.asarray(query, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    out = np.zeros(len(query), dtype=np.uint8)
    if len(ref) == 0:
        return out
    r2 = radii * radii
    for a in range(len(query)):
        dx = query[a][None, :, 0] - ref[:, :, 0]
        dy = query[a][None, :, 1] - ref[:, :, 1]
        hit = (dx * dx + dy * dy) <= r2[None, :]
        out[a] = 1 if hit.any(axis=0).all() else 0
    return out


def disc_components(points, radius):
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n == 0:
        return 0
    lim = (2.0 * radius) * (2.0 * radius)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    count = n
    for i in range(n):
        xi, yi = float(points[i, 0]), float(points[i, 1])
        for j in range(i + 1, n):
            dx = xi - float(points[j, 0])
            dy = yi - float(points[j, 1])
            if dx * dx + dy * dy <= lim:
                ri, rj = find(i), find(j)
                if ri != rj:
                    if ri < rj:
                        parent[rj] = ri
                    else:
                        parent[ri] = rj
                    count -= 1
    return count


def _clamp(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def simulate_episode(blocked, res, pos0, pref_speed, waypoints, wp_start, spawn_step,
                     max_steps, params, search):
    blk = np.asarray(blocked).tolist()
    nrow, ncol = len(blk), len(blk[0])
    tau, rep_a, rep_b, rep_r, obs_a, obs_b, obs_r, dt, vmax_factor, switch_r, margin = (
        float(p) for p in params[:11]
    )
    n = len(pos0)
    wps = [(float(x), float(y)) for x, y in np.asarray(waypoints)]
    wp_start = [int(v) for v in wp_start]
    spawn = [int(v) for v in spawn_step]
    pref = [float(v) for v in pref_speed]

    hist = np.zeros((n, max_steps + 1, 2))
    act = np.zeros((n, max_steps + 1), dtype=np.uint8)
    fin = np.full(n, -1, dtype=np.int64)
    nproj = np.zeros(n, dtype=np.int64)

    px = [0.0] * n
    py = [0.0] * n
    vx = [0.0] * n
    vy = [0.0] * n
    ax = [0.0] * n
    ay = [0.0] * n
    wp = [0] * n
    alive = [False] * n

    def is_blocked(x, y):
        c = math.floor(x / res)
        r = math.floor(y / res)
        if r < 0 or c < 0 or r >= nrow or c >= ncol:
            return True
        return blk[r][c] != 0

    for s in range(max_steps + 1):
        for i in range(n):
            if spawn[i] == s:
                alive[i] = True
                px[i], py[i] = float(pos0[i][0]), float(pos0[i][1])
                vx[i] = vy[i] = 0.0
                wp[i] = wp_start[i]
        for i in range(n):
            if not alive[i]:
                continue
            hist[i, s, 0] = px[i]
            hist[i, s, 1] = py[i]
            act[i, s] = 1
            while True:
                dx = wps[wp[i]][0] - px[i]
                dy = wps[wp[i]][1] - py[i]
                dist = math.sqrt(dx * dx + dy * dy)
                if dist >= switch_r:
                    break
                if wp[i] + 1 < wp_start[i + 1]:
                    wp[i] += 1
                else:
                    alive[i] = False
                    fin[i] = s
                    break
        if not any(alive[i] or spawn[i] > s for i in range(n)) or s == max_steps:
            break
        for i in range(n):
            if not alive[i]:
                continue
            dx = wps[wp[i]][0] - px[i]
            dy = wps[wp[i]][1] - py[i]
            dist = math.sqrt(dx * dx + dy * dy)
            ex = dx / dist
            ey = dy / dist
            fx = (pref[i] * ex - vx[i]) / tau
            fy = (pref[i] * ey - vy[i]) / tau
            for j in range(n):
                if j == i or not alive[j]:
                    continue
                dx = px[i] - px[j]
                dy = py[i] - py[j]
                dist = math.sqrt(dx * dx + dy * dy)
                if dist > 0.0:
                    scale = rep_a * math.exp((rep_r - dist) / rep_b)
                    fx = fx + scale * (dx / dist)
                    fy = fy + scale * (dy / dist)
            r0 = math.floor(py[i] / res)
            c0 = math.floor(px[i] / res)
            best = -1.0
            bx = by = 0.0
            for r in range(r0 - search, r0 + search + 1):
                for c in range(c0 - search, c0 + search + 1):
                    if r < 0 or c < 0 or r >= nrow or c >= ncol:
                        is_blk = True
                    else:
                        is_blk = blk[r][c] != 0
                    if not is_blk:
                        continue
                    qx = _clamp(px[i], c * res, (c + 1) * res)
                    qy = _clamp(py[i], r * res, (r + 1) * res)
                    dx = px[i] - qx
                    dy = py[i] - qy
                    d2 = dx * dx + dy * dy
                    if best < 0.0 or d2 < best:
                        best, bx, by = d2, qx, qy
            if best > 0.0:
                dist = math.sqrt(best)
                scale = obs_a * math.exp((obs_r - dist) / obs_b)
                fx = fx + scale * ((px[i] - bx) / dist)
                fy = fy + scale * ((py[i] - by) / dist)
            ax[i] = fx
            ay[i] = fy
        for i in range(n):
            if not alive[i]:
                continue
            vx[i] = vx[i] + ax[i] * dt
            vy[i] = vy[i] + ay[i] * dt
            speed = math.sqrt(vx[i] * vx[i] + vy[i] * vy[i])
            vmax = vmax_factor * pref[i]
            if speed > vmax:
                scale = vmax / speed
                vx[i] = vx[i] * scale
                vy[i] = vy[i] * scale
            px[i] = px[i] + vx[i] * dt
            py[i] = py[i] + vy[i] * dt
            if is_blocked(px[i], py[i]):
                nproj[i] += 1
                r0 = math.floor(py[i] / res)
                c0 = math.floor(px[i] / res)
                best = -1.0
                bx, by = px[i], py[i]
                for r in range(r0 - search, r0 + search + 1):
                    for c in range(c0 - search, c0 + search + 1):
                        if r < 0 or c < 0 or r >= nrow or c >= ncol or blk[r][c] != 0:
                            continue
                        qx = _clamp(px[i], c * res + margin, (c + 1) * res - margin)
                        qy = _clamp(py[i], r * res + margin, (r + 1) * res - margin)
                        dx = px[i] - qx
                        dy = py[i] - qy
                        d2 = dx * dx + dy * dy
                        if best < 0.0 or d2 < best:
                            best, bx, by = d2, qx, qy
                px[i], py[i] = bx, by
    return hist, act, fin, nproj
