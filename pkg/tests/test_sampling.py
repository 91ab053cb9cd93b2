import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mgtraj.model import MGGAN, ModelConfig, make_batch
from mgtraj.sampling import (
    PREDICTION_HEADER, allocate, predict, predict_batch, round_half_away, sample_expectation,
    sample_random, write_predictions,
)
from mgtraj.sim import build_junction_scene, simulate_dataset


@pytest.fixture(scope="module")
def batch():
    ds = simulate_dataset(build_junction_scene("two_way"), 30, seed=4)
    return make_batch(ds, np.arange(6))


@pytest.mark.parametrize("pi, k, expected", [
    ([0.5, 0.3, 0.2], 10, [5, 3, 2]),
    ([0.55, 0.45], 2, [1, 1]),
    ([0.5, 0.25, 0.25], 2, [0, 1, 1]),
])
def test_expectation_examples(pi, k, expected):
    assert sample_expectation(pi, k).tolist() == expected


def test_deficit_cascades_past_an_emptied_generator():
    # raw counts [1, 1, 1, 1, 1] for k = 3: the two largest lose one each
    counts = sample_expectation([0.24, 0.19, 0.19, 0.19, 0.19], 3)
    assert counts.sum() == 3 and counts.min() >= 0
    assert counts.tolist() == [0, 0, 1, 1, 1]


def test_round_half_away_from_zero():
    np.testing.assert_array_equal(round_half_away(np.array([0.5, 1.5, 2.5, -0.5, 0.49])),
                                  [1, 2, 3, -1, 0])


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 8), st.integers(1, 1000), st.integers(0, 2**32 - 1))
def test_expectation_counts_sum_to_k(n, k, seed):
    pi = np.random.default_rng(seed).dirichlet(np.ones(n) * 0.5)
    pi = pi / pi.sum()
    counts = sample_expectation(pi, k)
    assert counts.sum() == k and np.all(counts >= 0)


def test_expectation_consumes_no_randomness():
    rng = np.random.default_rng(3)
    state = rng.bit_generator.state
    allocate(np.array([0.3, 0.7]), 9, "expectation", rng)
    assert rng.bit_generator.state == state


def test_random_examples():
    rng = np.random.default_rng(0)
    assert np.all(sample_random([0, 0, 1.0, 0], 50, rng) == 2)
    counts = np.bincount(sample_random([0.5, 0.5], 10_000, np.random.default_rng(1)), minlength=2)
    assert abs(counts[0] - 5000) <= 3 * np.sqrt(10_000 * 0.25)
    a = sample_random([0.2, 0.8], 30, np.random.default_rng(9))
    b = sample_random([0.2, 0.8], 30, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_random_frequencies_chi_square():
    pi = np.array([0.1, 0.25, 0.4, 0.05, 0.2])
    counts = np.bincount(sample_random(pi, 100_000, np.random.default_rng(5)), minlength=5)
    assert stats.chisquare(counts, pi * 100_000).pvalue > 0.001


def test_invalid_inputs():
    with pytest.raises(ValueError):
        sample_expectation([0.5, 0.6], 3)
    with pytest.raises(ValueError):
        sample_expectation([0.5, 0.5], 0)
    with pytest.raises(ValueError):
        allocate(np.array([1.0]), 3, "greedy", np.random.default_rng(0))


def test_predict_sizes_and_allocation(batch):
    model = MGGAN(ModelConfig(n_generators=4), seed=2)
    sets = predict_batch(model, batch, 20, "expectation", np.random.default_rng(0))
    again = predict_batch(model, batch, 20, "expectation", np.random.default_rng(1))
    for ps, other in zip(sets, again):
        assert len(ps) == 20 and ps.trajectories.shape == (20, 12, 2)
        assert np.array_equal(ps.generator_ids, other.generator_ids)
        assert np.all((ps.generator_ids >= 0) & (ps.generator_ids < 4))


def test_random_strategy_only_uses_supported_generators(batch):
    model = MGGAN(ModelConfig(n_generators=3), seed=2)
    model.pm.layers[-1].weight.data[:] = 0
    model.pm.layers[-1].bias.data[:] = [0.0, -80.0, 0.0]  # generator 1 gets ~zero mass
    for ps in predict_batch(model, batch, 40, "random", np.random.default_rng(0)):
        assert 1 not in ps.generator_ids
        assert np.all(ps.pi > 0)


def test_single_prediction_reproducible_from_seeds(batch):
    model = MGGAN(ModelConfig(n_generators=2), seed=0)
    one = batch.take(np.array([2]))
    a = predict(model, one, 8, rng=np.random.default_rng(4))
    b = predict(model, one, 8, rng=np.random.default_rng(4))
    assert a.trajectories.tobytes() == b.trajectories.tobytes()
    assert len(set(a.noise_seeds.tolist())) == 8
    with pytest.raises(ValueError):
        predict(model, batch, 8)
    with pytest.raises(ValueError):
        predict(model, one, 0)


def test_single_generator_model_ignores_strategy(batch):
    model = MGGAN(ModelConfig(n_generators=1, pi_mode="single"), seed=0)
    for strategy in ("random", "expectation"):
        for ps in predict_batch(model, batch, 5, strategy, np.random.default_rng(0)):
            assert np.all(ps.generator_ids == 0) and np.all(ps.pi == 1.0)


def test_prediction_csv(batch, tmp_path):
    model = MGGAN(ModelConfig(n_generators=2), seed=0)
    sets = predict_batch(model, batch, 3, "expectation", np.random.default_rng(0))
    path = tmp_path / "pred.csv"
    write_predictions(path, sets[:2])
    lines = path.read_text().splitlines()
    assert lines[0] == PREDICTION_HEADER
    assert len(lines) == 1 + 2 * 3 * 12
    sid, gid, pi, t, x, y = lines[-1].split(",")
    assert sid == "5" and t == "12"
    assert float(x) == pytest.approx(sets[1].trajectories[-1, -1, 0], abs=1e-6)
