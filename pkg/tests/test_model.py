import numpy as np
import pytest

from mgtraj import nn
from mgtraj.checkpoint import load_checkpoint, save_checkpoint
from mgtraj.model import (
    FEAT, MGGAN, Batch, Encoder, ModelConfig, last_displacement, make_batch, neighbor_geometry,
)
from mgtraj.nn import Tensor
from mgtraj.sampling import predict_batch
from mgtraj.sim import build_junction_scene, simulate_dataset


@pytest.fixture(scope="module")
def small_ds():
    return simulate_dataset(build_junction_scene("three_way"), 40, seed=2)


def walk(n=3, start=(2.0, 3.0), step=(0.3, 0.4), seed=0):
    rng = np.random.default_rng(seed)
    base = np.asarray(start) + np.arange(8)[:, None] * np.asarray(step)
    return np.stack([base + rng.normal(0, 0.05, (8, 2)) for _ in range(n)])


def empty_batch(obs):
    b = len(obs)
    return Batch(obs, np.zeros((b, 1, 32, 32)), np.zeros((b, 0, 8, 2)), np.zeros((b, 0)))


# encoders ----------------------------------------------------------------------------

def test_dynamics_stationary_zero_params():
    enc = Encoder(np.random.default_rng(0))
    enc.zero_()
    d = enc.encode_dynamics(np.ones((2, 8, 2)) * 4.0)
    assert d.shape == (2, FEAT) and np.all(d.data == 0)


def test_dynamics_translation_invariant():
    enc = Encoder(np.random.default_rng(0))
    obs = walk()
    assert enc.encode_dynamics(obs).data.tobytes() == enc.encode_dynamics(obs + 10.0).data.tobytes() \
        or np.allclose(enc.encode_dynamics(obs).data, enc.encode_dynamics(obs + 10.0).data, atol=1e-12)


def test_dynamics_rejects_bad_input():
    enc = Encoder(np.random.default_rng(0))
    with pytest.raises(nn.DimensionError):
        enc.encode_dynamics(np.zeros((1, 7, 2)))
    bad = walk(1)
    bad[0, 3, 0] = np.nan
    with pytest.raises(nn.NumericError):
        enc.encode_dynamics(bad)


def test_physical_attention_uniform_map_ignores_d():
    rng = np.random.default_rng(1)
    enc = Encoder(rng)
    cell = rng.normal(size=16)
    f = np.broadcast_to(cell, (2, 64, 16)).copy()
    d = Tensor(rng.normal(size=(2, FEAT)))
    v, alpha = enc.physical_attention(f, d)
    expected = cell @ enc.phys_proj.weight.data + enc.phys_proj.bias.data
    np.testing.assert_allclose(v.data, np.broadcast_to(expected, (2, FEAT)), atol=1e-12)
    np.testing.assert_allclose(alpha.data.sum(axis=1), 1.0, atol=1e-12)


def test_physical_attention_saturated_score_selects_cell():
    rng = np.random.default_rng(2)
    enc = Encoder(rng)
    f = Tensor(rng.normal(size=(1, 64, 16)))
    scores = np.zeros((1, 64))
    scores[0, 17] = 20.0 + np.log(64.0)  # +20 above the rest after accounting for 63 competitors
    v, _ = enc.attend(f, Tensor(scores))
    target = f.data[0, 17] @ enc.phys_proj.weight.data + enc.phys_proj.bias.data
    assert np.max(np.abs(v.data[0] - target)) < 1e-6


def test_physical_attention_shape_error():
    enc = Encoder(np.random.default_rng(0))
    with pytest.raises(nn.DimensionError):
        enc.physical_attention(np.zeros((1, 8, 8, 3)), Tensor(np.zeros((1, FEAT))))


def _social(enc, d, nb_d, geom, mask):
    return enc.social_attention(Tensor(d), Tensor(nb_d), geom, mask).data


def test_social_attention_cases():
    rng = np.random.default_rng(3)
    enc = Encoder(rng)
    d = rng.normal(size=(1, FEAT))
    dj = rng.normal(size=(1, 1, FEAT))
    geom = np.array([[[1.5, np.cos(0.3), np.sin(0.3)]]])
    none = _social(enc, d, np.zeros((1, 0, FEAT)), np.zeros((1, 0, 3)), np.zeros((1, 0)))
    assert np.all(none == 0)
    masked = _social(enc, d, dj, geom, np.zeros((1, 1)))
    assert np.all(masked == 0)
    one = _social(enc, d, dj, geom, np.ones((1, 1)))
    np.testing.assert_allclose(one[0], dj[0, 0] @ enc.soc_proj.weight.data + enc.soc_proj.bias.data,
                               atol=1e-12)
    two = _social(enc, d, np.concatenate([dj, dj], axis=1), np.concatenate([geom, geom], axis=1),
                  np.ones((1, 2)))
    np.testing.assert_allclose(two, one, atol=1e-12)


def test_neighbor_bearing_range():
    obs = walk(1)
    nb = obs[:, None] + np.array([-1.0, 0.0])
    g = neighbor_geometry(obs, nb)
    ang = np.arctan2(g[..., 2], g[..., 1])
    assert np.all((ang > -np.pi) & (ang <= np.pi))
    np.testing.assert_allclose(g[..., 0], 1.0)


# generators, PM-Net, critic ---------------------------------------------------------------

def test_zero_generator_stays_at_last_position():
    model = MGGAN(ModelConfig(n_generators=2), seed=0)
    model.generators[1].zero_()
    obs = walk(2)
    c = Tensor(np.random.default_rng(0).normal(size=(2, 3 * FEAT)))
    y = model.decode(1, c, np.zeros((2, 8)), last_displacement(obs), obs[:, -1])
    assert y.shape == (2, 12, 2)
    np.testing.assert_array_equal(y.data, np.broadcast_to(obs[:, -1:], (2, 12, 2)))
    with pytest.raises(IndexError):
        model.decode(2, c, np.zeros((2, 8)), last_displacement(obs), obs[:, -1])


def test_generators_do_not_share_parameters():
    model = MGGAN(ModelConfig(n_generators=4), seed=0)
    ids = [{id(p) for p in g.parameters()} for g in model.generators]
    for i in range(4):
        for j in range(i + 1, 4):
            assert not ids[i] & ids[j]


def test_pm_net_uniform_when_zero_and_simplex():
    model = MGGAN(ModelConfig(n_generators=5), seed=0)
    c = Tensor(np.random.default_rng(0).normal(size=(50, 3 * FEAT)) * 5)
    pi = model.pi(c).data
    np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(pi > 0)
    model.pm.zero_()
    np.testing.assert_allclose(model.pi(c).data, 0.2, atol=1e-15)


def test_generator_count_range():
    with pytest.raises(ValueError):
        MGGAN(ModelConfig(n_generators=9))
    with pytest.raises(ValueError):
        MGGAN(ModelConfig(n_generators=1))


def test_critic_heads():
    model = MGGAN(ModelConfig(n_generators=3), seed=0)
    rng = np.random.default_rng(0)
    cond = Tensor(rng.normal(size=(10, 3 * FEAT)))
    traj = rng.normal(size=(1000, 12, 2)) * 3
    feats = model.critic.features(cond, rng.integers(0, 10, 1000), traj)
    p = model.critic.discriminate(feats).data
    assert np.all((p > 0) & (p < 1))
    probs = model.critic.classify(feats).data
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
    model.critic.disc.zero_()
    model.critic.cls.zero_()
    assert np.all(model.critic.discriminate(feats).data == 0.5)
    np.testing.assert_allclose(model.critic.classify(feats).data, 1 / 3, atol=1e-15)


def test_classifier_argmax_shift_invariant():
    logits = np.random.default_rng(0).normal(size=(20, 4))
    a = nn.softmax(Tensor(logits)).data.argmax(axis=1)
    b = nn.softmax(Tensor(logits + 7.5)).data.argmax(axis=1)
    assert np.array_equal(a, b)


def test_discriminator_gradient_wrt_trajectory():
    model = MGGAN(ModelConfig(n_generators=2), seed=0)
    rng = np.random.default_rng(1)
    cond = Tensor(rng.normal(size=(1, 3 * FEAT)))
    traj = Tensor(rng.normal(size=(1, 12, 2)), requires_grad=True)
    err = nn.grad_check(lambda: model.critic.discriminate(model.critic.features(cond, [0], traj)).sum(),
                        [traj])
    assert err < 1e-6


def test_zero_model_is_total(small_ds):
    model = MGGAN(ModelConfig(n_generators=3), seed=0)
    model.zero_()
    batch = make_batch(small_ds, np.arange(8))
    c = model.encoder(batch)
    assert np.all(c.data == 0)
    sets = predict_batch(model, batch, 5, "expectation", np.random.default_rng(0))
    for ps, obs in zip(sets, batch.obs):
        assert np.all(np.isfinite(ps.trajectories))
        np.testing.assert_array_equal(ps.trajectories, np.broadcast_to(obs[-1], (5, 12, 2)))


def test_condition_is_concatenation(small_ds):
    model = MGGAN(ModelConfig(n_generators=2), seed=0)
    batch = make_batch(small_ds, np.arange(6))
    c = model.encoder(batch).data
    assert c.shape == (6, 3 * FEAT)
    d = model.encoder.encode_dynamics(batch.obs).data
    np.testing.assert_array_equal(c[:, :FEAT], d)


def test_prediction_translation_equivariant(small_ds):
    model = MGGAN(ModelConfig(n_generators=3), seed=4)
    batch = make_batch(small_ds, np.arange(5))
    shift = np.array([7.0, -3.0])
    moved = Batch(batch.obs + shift, batch.patch, batch.nb_obs + shift, batch.nb_mask,
                  None, batch.patch_index)
    a = predict_batch(model, batch, 6, "expectation", np.random.default_rng(9))
    b = predict_batch(model, moved, 6, "expectation", np.random.default_rng(9))
    for pa, pb in zip(a, b):
        np.testing.assert_allclose(pb.trajectories, pa.trajectories + shift, atol=1e-9)
        assert np.array_equal(pa.generator_ids, pb.generator_ids)


def test_generate_keeps_input_order():
    model = MGGAN(ModelConfig(n_generators=3), seed=0)
    rng = np.random.default_rng(0)
    obs = walk(6)
    c = Tensor(rng.normal(size=(6, 3 * FEAT)))
    z = rng.normal(size=(6, 8))
    ids = np.array([2, 0, 1, 0, 2, 1])
    out = model.generate(c, ids, z, last_displacement(obs), obs[:, -1]).data
    for i in range(6):
        single = model.decode(ids[i], Tensor(c.data[i:i + 1]), z[i:i + 1], last_displacement(obs)[i:i + 1],
                              obs[i:i + 1, -1]).data
        np.testing.assert_allclose(out[i], single[0], atol=1e-12)


# checkpoints -----------------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    model = MGGAN(ModelConfig(n_generators=3), seed=5)
    model.pm_norm.update(np.random.default_rng(0).normal(2.0, 3.0, size=(10, 3 * FEAT)))
    save_checkpoint(model, tmp_path, {"seed": 5})
    back, manifest = load_checkpoint(tmp_path)
    assert manifest["n_generators"] == 3 and manifest["z_dim"] == 8
    names = [t["name"] for t in manifest["tensors"]]
    assert names == [n for n, _ in model.state_tensors()]
    assert names[-3:] == ["pm_norm.mean", "pm_norm.var", "pm_norm.count"]
    for (_, a), (_, b) in zip(model.state_tensors(), back.state_tensors()):
        np.testing.assert_array_equal(b.data, a.data.astype(np.float32).astype(np.float64))
    size = (tmp_path / "params.bin").stat().st_size
    assert size == 4 * sum(p.data.size for _, p in model.state_tensors())


def test_checkpoint_detects_tampered_config(tmp_path):
    import json

    save_checkpoint(MGGAN(ModelConfig(n_generators=2), seed=0), tmp_path)
    doc = json.loads((tmp_path / "manifest.json").read_text())
    doc["config"]["model"]["n_generators"] = 3
    (tmp_path / "manifest.json").write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="hash"):
        load_checkpoint(tmp_path)
