import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bootstrap_bench import datagen, envs, novelty
from bootstrap_bench.errors import ConfigError, UsageError

BIC = envs.make_spec("ball_in_cup")
ARM = envs.make_spec("redundant_arm")
QUICK = novelty.NsConfig(population_size=12, generations=4, k_nearest=5, archive_add_per_gen=3)


def brute_novelty(b, pool, k):
    dists = sorted(sum((x - y) ** 2 for x, y in zip(b, p)) ** 0.5 for p in pool)
    k = min(k, len(dists))
    return sum(dists[:k]) / k


def mean_pairwise(d):
    diff = d[:, None, :] - d[None, :, :]
    n = len(d)
    return np.sqrt((diff ** 2).sum(-1)).sum() / (n * (n - 1))


def test_novelty_simple_cases():
    assert novelty.novelty_score([3, 4], [[0, 0]], 1) == 5.0
    b = np.array([0.2, -0.1])
    assert novelty.novelty_score(b, np.vstack([b] * 4 + [[5, 5]]), 4) == 0.0
    with pytest.raises(UsageError):
        novelty.novelty_score(b, np.zeros((0, 2)), 1)
    with pytest.raises(ConfigError):
        novelty.novelty_score(b, [[0, 0]], 0)


def test_novelty_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n, d, k = rng.integers(1, 51), rng.integers(1, 4), rng.integers(1, 20)
        pool, b = rng.normal(size=(n, d)), rng.normal(size=d)
        assert abs(novelty.novelty_score(b, pool, k) - brute_novelty(b, pool, k)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=30),
       st.integers(1, 10), st.randoms(use_true_random=False))
def test_novelty_permutation_invariant(points, k, rnd):
    pool = np.array(points)
    order = list(range(len(pool)))
    rnd.shuffle(order)
    shuffled = pool[order]
    b = np.array([0.5, -0.5])
    s = novelty.novelty_score(b, pool, k)
    assert s >= 0
    assert abs(s - novelty.novelty_score(b, shuffled, k)) < 1e-9


def test_zero_generations_gives_empty_archive():
    arch = novelty.evolve(BIC, novelty.NsConfig(population_size=5, generations=0, k_nearest=2), 0)
    assert len(arch) == 0


def test_archive_growth_and_invariants():
    arch = novelty.evolve(ARM, QUICK, seed=1)
    assert len(arch) == QUICK.generations * QUICK.archive_add_per_gen
    for e in arch.entries:
        assert len(e.episode) <= ARM.horizon
        assert np.array_equal(e.descriptor, envs.observer(ARM, e.episode.states).values)
        for (_, _, s1), (s, _, _) in zip(e.episode.transitions, e.episode.transitions[1:]):
            assert np.array_equal(s1, s)
        replay = datagen.rollout_random_policy(ARM, e.policy)
        assert np.array_equal(replay.states, e.episode.states)


def test_evolve_is_deterministic():
    a, b = novelty.evolve(BIC, QUICK, 3), novelty.evolve(BIC, QUICK, 3)
    assert np.array_equal(a.descriptors(), b.descriptors())


def test_archive_more_spread_than_random_policies():
    cfg = novelty.NsConfig(population_size=12, generations=6, k_nearest=6, archive_add_per_gen=3)
    for seed in range(5):
        arch = novelty.evolve(BIC, cfg, seed)
        rand = np.array([envs.observer(BIC, datagen.rollout_random_policy(
            BIC, datagen.sample_random_policy(BIC, datagen.derive_seed(seed, 99, i))).states).values
            for i in range(len(arch))])
        assert mean_pairwise(arch.descriptors()) > mean_pairwise(rand)


def test_evaluation_suite():
    arch = novelty.evolve(ARM, QUICK, seed=2)
    full = novelty.evaluation_suite(arch, len(arch), 5)
    assert [id(e) for e in full] == [id(e) for e in arch.entries]
    s1 = novelty.evaluation_suite(arch, 5, 9)
    s2 = novelty.evaluation_suite(arch, 5, 9)
    assert [id(e) for e in s1] == [id(e) for e in s2] and len({id(e) for e in s1}) == 5
    with pytest.raises(UsageError):
        novelty.evaluation_suite(arch, len(arch) + 1, 0)


def test_archive_round_trip(tmp_path):
    arch = novelty.evolve(ARM, QUICK, seed=4)
    novelty.save_archive(arch, tmp_path / "a.npz")
    back = novelty.load_archive(tmp_path / "a.npz")
    assert back.env == arch.env and back.meta == arch.meta and len(back) == len(arch)
    for x, y in zip(arch.entries, back.entries):
        assert np.array_equal(x.episode.states, y.episode.states)
        assert np.array_equal(x.descriptor, y.descriptor)
        assert all(np.array_equal(p, q) for p, q in zip(x.policy.arrays(), y.policy.arrays()))


def test_config_validation():
    with pytest.raises(ConfigError):
        novelty.NsConfig(population_size=2, archive_add_per_gen=3)
    with pytest.raises(ConfigError):
        novelty.NsConfig(mutation_std=0)
