import json
import math

import numpy as np
import pytest

from mgtraj import _fallback, kernels
from mgtraj.sim import (
    Agent, OccupancyGrid, SocialForceParams, build_junction_scene, crop_patch, junction_keys,
    load_dataset, make_circle_toy, read_pgm, save_dataset, simulate_dataset, social_force_step,
    split_obs_future,
)
from mgtraj.sim.dataset import FRAME_DT, SUBSAMPLE
from mgtraj.sim.social_force import forces
from mgtraj.sim.toy import circle_starts


def open_grid(cells=40):
    walk = np.ones((cells, cells), dtype=bool)
    walk[0, :] = walk[-1, :] = walk[:, 0] = walk[:, -1] = False
    return OccupancyGrid(walk)


@pytest.fixture(scope="module")
def junction3():
    scene = build_junction_scene("three_way")
    return scene, simulate_dataset(scene, 3000, seed=7)


# social force ------------------------------------------------------------------

def test_single_agent_speeds_up_monotonically():
    grid = open_grid()
    agents = [Agent((14.0, 3.0), (0.0, 0.0), (14.0, 25.0), 1.3)]
    speeds = []
    for _ in range(60):
        agents = social_force_step(agents, grid)
        speeds.append(math.hypot(*agents[0].velocity))
    assert all(b >= a for a, b in zip(speeds, speeds[1:]))
    assert abs(speeds[-1] - 1.3) < 1e-3
    assert abs(agents[0].velocity[0]) < 1e-12


def test_head_on_agents_separate_laterally():
    grid = open_grid(60)
    agents = [Agent((20.0, 21.0), (1.2, 0.0), (40.0, 21.0), 1.2),
              Agent((30.0, 21.05), (-1.2, 0.0), (10.0, 21.05), 1.2)]
    seps = []
    while abs(agents[0].position[0] - agents[1].position[0]) > 0.3 and len(seps) < 200:
        agents = social_force_step(agents, grid)
        d = math.dist(agents[0].position, agents[1].position)
        seps.append((d, abs(agents[0].position[1] - agents[1].position[1])))
    lateral = [lat for d, lat in seps if d < 2.0]
    assert len(lateral) > 2
    assert all(b > a for a, b in zip(lateral, lateral[1:]))


def test_wall_force_points_away():
    grid = open_grid()
    # agent 0.2 m above the blocked bottom row (row 0 spans y in [0, 0.7))
    agent = Agent((14.0, 0.9), (0.0, 0.0), (14.0, 0.9), 1.3)
    f = forces([agent], grid)[0]
    assert f[1] > 0 and abs(f[0]) < 1e-9


def test_step_rejects_non_positive_dt():
    with pytest.raises(ValueError):
        social_force_step([], open_grid(), dt=0.0)


def test_kernel_matches_single_step_model():
    grid = open_grid()
    params = SocialForceParams()
    pos0 = np.array([[5.0, 4.0], [6.5, 20.0]])
    goals = np.array([[20.0, 24.0], [7.0, 3.0]])
    hist, act, fin, _ = kernels.simulate_episode(
        grid.blocked.astype(np.uint8), grid.resolution, pos0, np.array([1.3, 1.1]), goals,
        np.array([0, 1, 2]), np.array([0, 0]), 40, params.as_array())
    agents = [Agent(tuple(pos0[0]), (0.0, 0.0), tuple(goals[0]), 1.3),
              Agent(tuple(pos0[1]), (0.0, 0.0), tuple(goals[1]), 1.1)]
    for t in range(1, 41):
        agents = social_force_step(agents, grid, params)
        for a in range(2):
            np.testing.assert_allclose(hist[a, t], agents[a].position, rtol=0, atol=1e-12)


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled extension not built")
def test_compiled_and_fallback_kernels_bit_identical():
    from mgtraj import _kernels

    scene = build_junction_scene("three_way")
    blocked = scene.grid.blocked.astype(np.uint8)
    wps = np.array(scene.routes[1].waypoints + scene.routes[2].waypoints)
    args = (blocked, scene.grid.resolution, np.array([[21.0, 1.6], [21.3, 1.6]]), np.array([1.3, 1.5]),
            wps, np.array([0, 2, 4]), np.array([0, 24]), 600, SocialForceParams().as_array(), 3)
    for a, b in zip(_kernels.simulate_episode(*args), _fallback.simulate_episode(*args)):
        assert np.asarray(a).tobytes() == np.asarray(b).tobytes()
    rng = np.random.default_rng(0)
    q, r = rng.normal(size=(40, 12, 2)), rng.normal(size=(30, 12, 2))
    radii = np.linspace(0.2, 2.0, 12)
    assert _kernels.manifold_cover(q, r, radii).tobytes() == _fallback.manifold_cover(q, r, radii).tobytes()
    pts = rng.normal(size=(80, 2)) * 3
    assert _kernels.disc_components(pts, 0.4) == _fallback.disc_components(pts, 0.4)


# scenes -------------------------------------------------------------------------

@pytest.mark.parametrize("kind, n", [("three_way", 3), ("two_way", 2), ("corridor", 1)])
def test_scene_route_counts(kind, n):
    scene = build_junction_scene(kind)
    probs = [r.probability for r in scene.routes]
    assert len(scene.routes) == n
    np.testing.assert_allclose(probs, [1.0 / n] * n)


def test_waypoints_walkable_for_many_seeds():
    for seed in range(100):
        for kind in ("three_way", "two_way"):
            scene = build_junction_scene(kind, seed=seed)
            for r in scene.routes:
                assert scene.grid.walkable_points(np.array(r.waypoints)).all()


def test_too_narrow_corridor_rejected():
    with pytest.raises(ValueError, match="width"):
        build_junction_scene("three_way", corridor_width=1.0)


def test_unknown_scene_kind():
    with pytest.raises(ValueError):
        build_junction_scene("roundabout")


# simulated datasets -------------------------------------------------------------

def test_dataset_deterministic_across_thread_counts(monkeypatch):
    scene = build_junction_scene("two_way")
    monkeypatch.setenv("MGTRAJ_THREADS", "1")
    a = simulate_dataset(scene, 300, seed=3)
    monkeypatch.setenv("MGTRAJ_THREADS", "4")
    b = simulate_dataset(scene, 300, seed=3)
    assert a.positions.tobytes() == b.positions.tobytes()
    assert np.array_equal(a.neighbors, b.neighbors, equal_nan=True)
    assert a.keys == b.keys


def test_route_frequencies(junction3):
    scene = build_junction_scene("three_way")
    ds = simulate_dataset(scene, 12000, seed=11, windows_per_agent=1)
    freq = np.bincount(ds.routes, minlength=3) / len(ds)
    assert np.all(np.abs(freq - 1 / 3) <= 0.05)


def test_records_walkable_and_plausible(junction3):
    scene, ds = junction3
    assert ds.positions.shape[1:] == (20, 2)
    assert scene.grid.walkable_points(ds.positions.reshape(-1, 2)).all()
    steps = np.linalg.norm(np.diff(ds.positions, axis=1), axis=-1)
    assert np.all(steps <= 2.0 * ds.pref_speed[:, None] * FRAME_DT)
    assert 0.2 <= steps.mean() <= 0.9
    assert ds.log["projections"] == 0


def test_junction_sets_are_multimodal(junction3):
    scene, ds = junction3
    keys = junction_keys(ds, scene.junction, min_members=2)
    assert len(keys) >= 8
    multi = [len(np.unique(ds.routes[m])) >= 2 for m in keys.values()]
    assert np.mean(multi) >= 0.8


def test_exact_record_count_or_fewer(junction3):
    _, ds = junction3
    assert len(ds) == 3000
    small = simulate_dataset(build_junction_scene("three_way"), 100, seed=7)
    assert len(small) == 100


def test_invalid_simulation_arguments():
    scene = build_junction_scene("corridor")
    with pytest.raises(ValueError):
        simulate_dataset(scene, 0)
    with pytest.raises(ValueError):
        simulate_dataset(scene, 10, max_agents_concurrent=3)


def test_subsampling_matches_frame_rate():
    assert math.isclose(SocialForceParams().dt * SUBSAMPLE, FRAME_DT)


def test_split_obs_future():
    rec = np.arange(40, dtype=float).reshape(20, 2)
    x, y = split_obs_future(rec)
    assert x.shape == (8, 2) and y.shape == (12, 2)
    np.testing.assert_array_equal(x[7], rec[7])
    np.testing.assert_array_equal(np.concatenate([x, y]), rec)
    with pytest.raises(ValueError):
        split_obs_future(rec[:19])


# circle toy ----------------------------------------------------------------------

def test_circle_toy_families_and_frequencies():
    ds = make_circle_toy(seed=0, n_per_start=2000)
    fams = set(zip(ds.starts.tolist(), ds.routes.tolist()))
    assert len(fams) == 18
    for s in range(6):
        freq = np.bincount(ds.routes[ds.starts == s], minlength=3) / np.sum(ds.starts == s)
        assert np.all(np.abs(freq - 1 / 3) <= 0.05)


def test_circle_starts_equidistant():
    starts = circle_starts()
    radius = np.linalg.norm(starts - 15.0, axis=1)
    np.testing.assert_allclose(radius, 10.0, atol=1e-9)
    gaps = np.linalg.norm(starts - np.roll(starts, 1, axis=0), axis=1)
    np.testing.assert_allclose(gaps, gaps[0], atol=1e-9)


# patches and files ------------------------------------------------------------------

def test_crop_patch_centre_and_corner():
    grid = open_grid(40)
    centre = crop_patch(grid, (20 * 0.7, 20 * 0.7))
    assert centre.shape == (32, 32) and centre.all()
    corner = crop_patch(grid, (0.1, 0.1))
    assert corner.shape == (32, 32)
    assert (corner == 0).sum() >= 0.75 * 32 * 32


def test_dataset_files_round_trip(tmp_path):
    scene = build_junction_scene("two_way")
    ds = simulate_dataset(scene, 50, seed=1)
    save_dataset(ds, tmp_path)
    lines = (tmp_path / "trajectories.csv").read_text().splitlines()
    assert lines[0] == "scene_id,ped_id,t,x,y,split"
    assert lines[1].split(",")[5] == "obs" and lines[9].split(",")[5] == "fut"
    assert len(lines[1].split(",")[3].split(".")[1]) == 6
    assert json.loads((tmp_path / "occupancy.json").read_text()) == {"resolution_m": 0.7}
    assert (tmp_path / "occupancy.pgm").read_bytes().startswith(b"P5")
    back = load_dataset(tmp_path)
    np.testing.assert_allclose(back.positions, ds.positions, atol=5e-7)
    assert back.keys == ds.keys
    assert np.array_equal(read_pgm(tmp_path / "occupancy.pgm").walkable, scene.grid.walkable)
