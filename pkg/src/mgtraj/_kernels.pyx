# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. ``mgtraj._fallback`` holds the reference versions.

Both must produce bit-identical results.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, floor, sqrt

cnp.import_array()


def manifold_cover(const double[:, :, ::1] query, const double[:, :, ::1] ref,
                   const double[::1] radii):
    """1 for each query trajectory that stays inside the union of discs around ``ref``."""
    cdef Py_ssize_t na = query.shape[0], nb = ref.shape[0], nt = query.shape[1]
    cdef Py_ssize_t a, b, t
    cdef double dx, dy, r2
    cdef bint found, inside
    out = np.zeros(na, dtype=np.uint8)
    cdef unsigned char[::1] res = out
    if nb == 0:
        return out
    with nogil:
        for a in range(na):
            inside = True
            for t in range(nt):
                r2 = radii[t] * radii[t]
                found = False
                for b in range(nb):
                    dx = query[a, t, 0] - ref[b, t, 0]
                    dy = query[a, t, 1] - ref[b, t, 1]
                    if dx * dx + dy * dy <= r2:
                        found = True
                        break
                if not found:
                    inside = False
                    break
            res[a] = 1 if inside else 0
    return out


cdef Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t i) nogil:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def disc_components(const double[:, ::1] points, double radius):
    """Connected components of the disc-overlap graph (centres within 2r)."""
    cdef Py_ssize_t n = points.shape[0], i, j, ri, rj
    cdef double dx, dy, lim = (2.0 * radius) * (2.0 * radius)
    cdef Py_ssize_t count = n
    if n == 0:
        return 0
    parent_arr = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] parent = parent_arr
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dx = points[i, 0] - points[j, 0]
                dy = points[i, 1] - points[j, 1]
                if dx * dx + dy * dy <= lim:
                    ri = _find(parent, i)
                    rj = _find(parent, j)
                    if ri != rj:
                        if ri < rj:
                            parent[rj] = ri
                        else:
                            parent[ri] = rj
                        count -= 1
    return count


cdef inline bint _blocked(const unsigned char[:, ::1] blocked, double res, double x, double y) nogil:
    cdef Py_ssize_t c = <Py_ssize_t>floor(x / res)
    cdef Py_ssize_t r = <Py_ssize_t>floor(y / res)
    if r < 0 or c < 0 or r >= blocked.shape[0] or c >= blocked.shape[1]:
        return True
    return blocked[r, c] != 0


cdef inline double _clampd(double v, double lo, double hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def simulate_episode(const unsigned char[:, ::1] blocked, double res,
                     const double[:, ::1] pos0, const double[::1] pref_speed,
                     const double[:, ::1] waypoints, const long[::1] wp_start,
                     const long[::1] spawn_step, long max_steps, const double[::1] params,
                     long search):
    cdef double tau = params[0], rep_a = params[1], rep_b = params[2], rep_r = params[3]
    cdef double obs_a = params[4], obs_b = params[5], obs_r = params[6], dt = params[7]
    cdef double vmax_factor = params[8], switch_r = params[9], margin = params[10]
    cdef Py_ssize_t n = pos0.shape[0]
    cdef Py_ssize_t nrow = blocked.shape[0], ncol = blocked.shape[1]

    hist_arr = np.zeros((n, max_steps + 1, 2), dtype=np.float64)
    act_arr = np.zeros((n, max_steps + 1), dtype=np.uint8)
    fin_arr = np.full(n, -1, dtype=np.int64)
    proj_arr = np.zeros(n, dtype=np.int64)
    cdef double[:, :, ::1] hist = hist_arr
    cdef unsigned char[:, ::1] act = act_arr
    cdef long long[::1] fin = fin_arr
    cdef long long[::1] nproj = proj_arr

    px_a = np.zeros(n); py_a = np.zeros(n); vx_a = np.zeros(n); vy_a = np.zeros(n)
    ax_a = np.zeros(n); ay_a = np.zeros(n)
    cdef double[::1] px = px_a, py = py_a, vx = vx_a, vy = vy_a, ax = ax_a, ay = ay_a
    wp_a = np.zeros(n, dtype=np.int64)
    alive_a = np.zeros(n, dtype=np.uint8)
    cdef long long[::1] wp = wp_a
    cdef unsigned char[::1] alive = alive_a

    cdef Py_ssize_t s, i, j, r, c, r0, c0
    cdef double gx, gy, dx, dy, dist, ex, ey, fx, fy, d2, best, qx, qy, bx, by
    cdef double speed, vmax, scale, x0, x1, y0, y1
    cdef bint any_left, is_blk

    with nogil:
        for s in range(max_steps + 1):
            for i in range(n):
                if spawn_step[i] == s:
                    alive[i] = 1
                    px[i] = pos0[i, 0]
                    py[i] = pos0[i, 1]
                    vx[i] = 0.0
                    vy[i] = 0.0
                    wp[i] = wp_start[i]
            # waypoint switching and arrival
            for i in range(n):
                if not alive[i]:
                    continue
                hist[i, s, 0] = px[i]
                hist[i, s, 1] = py[i]
                act[i, s] = 1
                while True:
                    dx = waypoints[wp[i], 0] - px[i]
                    dy = waypoints[wp[i], 1] - py[i]
                    dist = sqrt(dx * dx + dy * dy)
                    if dist >= switch_r:
                        break
                    if wp[i] + 1 < wp_start[i + 1]:
                        wp[i] += 1
                    else:
                        alive[i] = 0
                        fin[i] = s
                        break
            any_left = False
            for i in range(n):
                if alive[i] or spawn_step[i] > s:
                    any_left = True
            if not any_left or s == max_steps:
                break
            # forces from the current snapshot
            for i in range(n):
                if not alive[i]:
                    continue
                dx = waypoints[wp[i], 0] - px[i]
                dy = waypoints[wp[i], 1] - py[i]
                dist = sqrt(dx * dx + dy * dy)
                ex = dx / dist
                ey = dy / dist
                fx = (pref_speed[i] * ex - vx[i]) / tau
                fy = (pref_speed[i] * ey - vy[i]) / tau
                for j in range(n):
                    if j == i or not alive[j]:
                        continue
                    dx = px[i] - px[j]
                    dy = py[i] - py[j]
                    dist = sqrt(dx * dx + dy * dy)
                    if dist > 0.0:
                        scale = rep_a * exp((rep_r - dist) / rep_b)
                        fx = fx + scale * (dx / dist)
                        fy = fy + scale * (dy / dist)
                r0 = <Py_ssize_t>floor(py[i] / res)
                c0 = <Py_ssize_t>floor(px[i] / res)
                best = -1.0
                bx = 0.0
                by = 0.0
                for r in range(r0 - search, r0 + search + 1):
                    for c in range(c0 - search, c0 + search + 1):
                        if r < 0 or c < 0 or r >= nrow or c >= ncol:
                            is_blk = True
                        else:
                            is_blk = blocked[r, c] != 0
                        if not is_blk:
                            continue
                        qx = _clampd(px[i], c * res, (c + 1) * res)
                        qy = _clampd(py[i], r * res, (r + 1) * res)
                        dx = px[i] - qx
                        dy = py[i] - qy
                        d2 = dx * dx + dy * dy
                        if best < 0.0 or d2 < best:
                            best = d2
                            bx = qx
                            by = qy
                if best > 0.0:
                    dist = sqrt(best)
                    scale = obs_a * exp((obs_r - dist) / obs_b)
                    fx = fx + scale * ((px[i] - bx) / dist)
                    fy = fy + scale * ((py[i] - by) / dist)
                ax[i] = fx
                ay[i] = fy
            # semi-implicit Euler
            for i in range(n):
                if not alive[i]:
                    continue
                vx[i] = vx[i] + ax[i] * dt
                vy[i] = vy[i] + ay[i] * dt
                speed = sqrt(vx[i] * vx[i] + vy[i] * vy[i])
                vmax = vmax_factor * pref_speed[i]
                if speed > vmax:
                    scale = vmax / speed
                    vx[i] = vx[i] * scale
                    vy[i] = vy[i] * scale
                px[i] = px[i] + vx[i] * dt
                py[i] = py[i] + vy[i] * dt
                if _blocked(blocked, res, px[i], py[i]):
                    nproj[i] += 1
                    r0 = <Py_ssize_t>floor(py[i] / res)
                    c0 = <Py_ssize_t>floor(px[i] / res)
                    best = -1.0
                    bx = px[i]
                    by = py[i]
                    for r in range(r0 - search, r0 + search + 1):
                        for c in range(c0 - search, c0 + search + 1):
                            if r < 0 or c < 0 or r >= nrow or c >= ncol:
                                continue
                            if blocked[r, c] != 0:
                                continue
                            x0 = c * res + margin
                            x1 = (c + 1) * res - margin
                            y0 = r * res + margin
                            y1 = (r + 1) * res - margin
                            qx = _clampd(px[i], x0, x1)
                            qy = _clampd(py[i], y0, y1)
                            dx = px[i] - qx
                            dy = py[i] - qy
                            d2 = dx * dx + dy * dy
                            if best < 0.0 or d2 < best:
                                best = d2
                                bx = qx
                                by = qy
                    px[i] = bx
                    py[i] = by
    return hist_arr, act_arr, fin_arr, proj_arr
