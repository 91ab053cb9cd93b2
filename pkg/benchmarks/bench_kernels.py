"""Time the compiled kernels against the pure-Python fallback on realistic inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the best-of-N wall time of each backend and
the speed-up, after checking that both return identical results.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from mgtraj import _fallback
from mgtraj.metrics import radii
from mgtraj.sim import SocialForceParams, build_junction_scene

try:
    from mgtraj import _kernels
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None


def cases():
    rng = np.random.default_rng(0)
    gen = rng.normal(size=(20, 12, 2)).cumsum(axis=1) * 0.4
    gt = rng.normal(size=(60, 12, 2)).cumsum(axis=1) * 0.4
    yield "manifold_cover (20 x 60 x 12)", "manifold_cover", (gen, gt, radii(12, 2.0))
    pts = rng.normal(size=(300, 2)) * 4.0
    yield "disc_components (300 points)", "disc_components", (pts, 0.5)
    scene = build_junction_scene("three_way")
    wps = np.array(scene.routes[1].waypoints + scene.routes[2].waypoints)
    args = (scene.grid.blocked.astype(np.uint8), scene.grid.resolution,
            np.array([[21.0, 1.6], [21.3, 1.6]]), np.array([1.3, 1.5]), wps, np.array([0, 2, 4]),
            np.array([0, 24]), 600, SocialForceParams().as_array(), 3)
    yield "simulate_episode (2 agents, 600 steps)", "simulate_episode", args


def best_time(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.asarray(a).tobytes() == np.asarray(b).tobytes()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'kernel':<42}{'python':>12}{'cython':>12}{'speed-up':>10}")
    for label, name, kargs in cases():
        py, cy = getattr(_fallback, name), getattr(_kernels, name)
        if not same(py(*kargs), cy(*kargs)):
            print(f"{label}: backends disagree")
            return 1
        t_py, t_cy = best_time(py, kargs, args.repeat), best_time(cy, kargs, args.repeat)
        print(f"{label:<42}{t_py * 1e3:>10.3f}ms{t_cy * 1e3:>10.3f}ms{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
