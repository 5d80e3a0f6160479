import dataclasses

import numpy as np
import pytest

from bootstrap_bench import datagen, dynamics, envs
from bootstrap_bench.datagen import Dataset
from bootstrap_bench.errors import ConfigError, RolloutError, UsageError
from bootstrap_bench.nn import mlp_forward

ARM = envs.make_spec("redundant_arm")
BIC = envs.make_spec("ball_in_cup")
SMALL = dynamics.TrainConfig(epochs=15, hidden=(16, 16), ensemble_size=3)


def toy_dataset(n=200, sd=3, ad=2, seed=0, step=None):
    rng = np.random.default_rng(seed)
    s, a = rng.normal(size=(n, sd)), rng.uniform(-1, 1, (n, ad))
    nxt = s.copy() if step is None else step(s, a)
    return Dataset(s, a, nxt, np.array([0]), ["random_actions"])


@pytest.fixture(scope="module")
def arm_model():
    ds = datagen.gather(ARM, "rarph", 3, 10, seed=0)
    return ds, dynamics.fit(ds, SMALL, seed=5)


def fixed_model(member_biases, sd=2, ad=1):
    """Members with zero weights: each outputs its bias as the normalized delta mean."""
    m = len(member_biases)
    params = dynamics.mlp_init((sd + ad, 4, 2 * sd), "tanh", 0, members=m)
    arrays = [np.zeros_like(a) for a in params.arrays()]
    arrays[-1][:, :sd] = np.asarray(member_biases, dtype=float)
    return dynamics.EnsembleModel(params.with_arrays(arrays), np.zeros(sd + ad), np.ones(sd + ad),
                                  np.zeros(sd), np.ones(sd), sd, ad,
                                  dynamics.TrainConfig(ensemble_size=max(m, 2)), 0, np.zeros((m, 2)))


def reference_predict(model, state, action):
    x = (np.concatenate([state, action]) - model.in_mean) / model.in_std
    outs = []
    for k in range(model.n_members):
        member = model.params.with_arrays([a[k] for a in model.params.arrays()])
        mean = mlp_forward(member, x)[:model.state_dim]
        outs.append(mean * model.out_std + model.out_mean)
    return state + sum(outs) / len(outs)


def test_constant_dynamics_learned():
    model = dynamics.fit(toy_dataset(), SMALL, seed=1)
    s = np.random.default_rng(9).normal(size=(50, 3))
    a = np.zeros((50, 2))
    assert np.mean(np.abs(dynamics.predict_step(model, s, a) - s)) < 1e-2


def test_training_lowers_nll_per_member(arm_model):
    _, model = arm_model
    assert np.all(model.train_nll[:, 1] < model.train_nll[:, 0])


def test_fit_is_deterministic(arm_model):
    ds, model = arm_model
    again = dynamics.fit(ds, SMALL, seed=5)
    assert all(np.array_equal(a, b) for a, b in zip(model.params.arrays(), again.params.arrays()))


def test_fit_rejects_empty_dataset():
    empty = Dataset(np.zeros((0, 3)), np.zeros((0, 2)), np.zeros((0, 3)), np.array([0]), [])
    with pytest.raises(UsageError):
        dynamics.fit(empty, SMALL)


def test_train_config_validation():
    for bad in ({"ensemble_size": 1}, {"epochs": 0}, {"bootstrap_fraction": 1.5},
                {"learning_rate": 0.0}):
        with pytest.raises(ConfigError):
            dynamics.TrainConfig(**bad)


def test_normalizer_floor_and_round_trip(arm_model):
    ds, model = arm_model
    assert np.all(model.in_std >= 1e-8) and np.all(model.out_std >= 1e-8)
    x = np.hstack([ds.states, ds.actions])
    np.testing.assert_allclose(model.denormalize(model.normalize(x)), x, rtol=0, atol=1e-12)


def test_fit_invariant_to_sample_order():
    ds = toy_dataset(120, step=lambda s, a: s + 0.1 * np.hstack([a, a[:, :1]]))
    idx = dynamics.resample_indices(len(ds), SMALL, 3)
    perm = np.random.default_rng(4).permutation(len(ds))
    shuffled = Dataset(ds.states[perm], ds.actions[perm], ds.next_states[perm], ds.episode_starts, [])
    inv = np.argsort(perm)
    m1 = dynamics.fit(ds, SMALL, seed=3, indices=idx)
    m2 = dynamics.fit(shuffled, SMALL, seed=3, indices=inv[idx])
    assert all(np.array_equal(a, b) for a, b in zip(m1.params.arrays(), m2.params.arrays()))


def test_predict_step_aggregation_cases():
    s, a = np.array([0.3, -1.2]), np.array([0.5])
    np.testing.assert_array_equal(dynamics.predict_step(fixed_model([[0, 0], [0, 0]]), s, a), s)
    np.testing.assert_allclose(dynamics.predict_step(fixed_model([[0.4, -2], [-0.4, 2]]), s, a), s,
                               atol=1e-15)
    with pytest.raises(UsageError):
        dynamics.predict_step(fixed_model([[0, 0], [0, 0]]), np.array([np.nan, 0]), a)


def test_predict_step_matches_reference(arm_model):
    _, model = arm_model
    rng = np.random.default_rng(2)
    for _ in range(10):
        s, a = rng.normal(0, 0.5, 22), rng.uniform(-0.25, 0.25, 20)
        np.testing.assert_allclose(dynamics.predict_step(model, s, a), reference_predict(model, s, a),
                                   rtol=0, atol=1e-10)


def test_predict_uncertainty():
    s, a = np.zeros(2), np.zeros(1)
    assert dynamics.predict_uncertainty(fixed_model([[0.7, 0.1]] * 3), s, a) == 0.0
    # per-dim variances (1, 0), averaged over the two output dims
    assert dynamics.predict_uncertainty(fixed_model([[1, 0], [-1, 0]]), s, a) == 0.5


def test_predict_uncertainty_oracle(arm_model):
    _, model = arm_model
    rng = np.random.default_rng(3)
    s, a = rng.normal(0, 0.5, 22), rng.uniform(-0.25, 0.25, 20)
    x = (np.concatenate([s, a]) - model.in_mean) / model.in_std
    means = []
    for k in range(model.n_members):
        member = model.params.with_arrays([p[k] for p in model.params.arrays()])
        means.append(mlp_forward(member, x)[:22] * model.out_std + model.out_mean)
    means = np.array(means)
    var = ((means - means.mean(axis=0)) ** 2).mean(axis=0)
    assert abs(dynamics.predict_uncertainty(model, s, a) - var.mean()) < 1e-12
    assert dynamics.predict_uncertainty(model, s, a) >= 0


def test_rollout_cases(arm_model):
    _, model = arm_model
    start = envs.reset(ARM).values
    policy = datagen.sample_random_policy(ARM, 4)
    one = dynamics.rollout_model(model, ARM, policy, start, 1)
    assert one.shape == (2, 22)
    a0 = datagen.policy_action(ARM, policy, start)
    np.testing.assert_allclose(one[1], dynamics.predict_step(model, start, a0), atol=1e-12)

    three = dynamics.rollout_model(model, ARM, policy, start, 3)
    s = start
    for t in range(1, 4):
        s = dynamics.predict_step(model, s, datagen.policy_action(ARM, policy, s))
        np.testing.assert_allclose(three[t], s, rtol=0, atol=1e-12)

    schedule = datagen.sample_action_schedule(ARM, 10, 1)
    traj = dynamics.rollout_model(model, ARM, schedule, start, 12)
    s = start
    for t in range(12):
        s = dynamics.predict_step(model, s, schedule.action_at(t))
    np.testing.assert_allclose(traj[-1], s, rtol=0, atol=1e-12)

    zero = fixed_model([[0] * 22, [0] * 22], sd=22, ad=20)
    const = dynamics.rollout_model(zero, ARM, policy, start, 5)
    assert np.all(const == start)
    with pytest.raises(ConfigError):
        dynamics.rollout_model(model, ARM, policy, start, 0)


def test_rollout_divergence_reports_step():
    m = fixed_model([[1e300, 0], [1e300, 0]])
    m = dataclasses.replace(m, out_std=np.array([1e10, 1.0]))
    spec = dataclasses.replace(BIC, state_dim=2, action_dim=1, action_low=np.array([-1.0]),
                               action_high=np.array([1.0]))
    sched = datagen.ActionSchedule(10, np.zeros((30, 1)))
    with pytest.raises(RolloutError) as info:
        dynamics.rollout_model(m, spec, sched, np.zeros(2), 4)
    assert info.value.step_index == 1
    traj, at = dynamics.rollout_batch(m, spec, [sched, sched], np.zeros((2, 2)), 4)
    assert list(at) == [1, 1] and np.all(np.isnan(traj[:, 1:]))


def test_prediction_error():
    rng = np.random.default_rng(0)
    t = rng.normal(size=(6, 4))
    assert dynamics.prediction_error(t, t) == 0.0
    a, b = np.zeros((2, 4)), np.zeros((2, 4))
    b[1, :2] = [3, 4]
    assert dynamics.prediction_error(a, b) == 5.0
    for _ in range(20):
        n = rng.integers(2, 30)
        p, q = rng.normal(size=(n, 5)), rng.normal(size=(n, 5))
        total = 0.0
        for i in range(1, n):
            total += sum((p[i, j] - q[i, j]) ** 2 for j in range(5)) ** 0.5
        assert abs(dynamics.prediction_error(p, q) - total / (n - 1)) < 1e-12
    with pytest.raises(UsageError):
        dynamics.prediction_error(np.zeros((3, 2)), np.zeros((4, 2)))


def test_model_round_trip(arm_model, tmp_path):
    _, model = arm_model
    dynamics.save_model(model, tmp_path / "m.npz")
    back = dynamics.load_model(tmp_path / "m.npz")
    assert all(np.array_equal(a, b) for a, b in zip(model.params.arrays(), back.params.arrays()))
    assert back.config == model.config and back.seed == model.seed
    s, a = envs.reset(ARM).values, np.zeros(20)
    assert np.array_equal(dynamics.predict_step(model, s, a), dynamics.predict_step(back, s, a))
