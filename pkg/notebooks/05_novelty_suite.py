"""
Evaluation trajectories from Novelty Search
===========================================

Policies are evolved for behavioral novelty alone.  The archive they leave
behind covers far more of the outcome space than random policies do, and a
subset of it becomes the ground truth for every model in an experiment.
"""
import numpy as np

from bootstrap_bench import datagen, envs, novelty

bic = envs.make_spec("ball_in_cup")
config = novelty.NsConfig(population_size=20, generations=8, k_nearest=10)
archive = novelty.evolve(bic, config, seed=0)
print(len(archive), "archive entries")


def spread(d):
    return np.mean([np.linalg.norm(a - b) for i, a in enumerate(d) for b in d[i + 1:]])


random_desc = np.array([
    envs.observer(bic, datagen.rollout_random_policy(bic, datagen.sample_random_policy(bic, s)).states).values
    for s in range(len(archive))])
print("mean pairwise distance: archive", spread(archive.descriptors()), "random", spread(random_desc))

print(novelty.novelty_score([3.0, 4.0], [[0.0, 0.0]], k=1))

suite = novelty.evaluation_suite(archive, 10, seed=1)
print([len(e.episode) for e in suite])
