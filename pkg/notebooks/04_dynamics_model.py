"""
Fitting and rolling out an ensemble model
=========================================

Each member sees its own bootstrap resample and predicts a Gaussian over
the normalized state change.  Rollouts feed the averaged prediction back in.
"""
import numpy as np

from bootstrap_bench import datagen, dynamics, envs

arm = envs.make_spec("redundant_arm_no_walls")
data = datagen.gather(arm, "random_actions", 4, seed=0)
config = dynamics.TrainConfig(epochs=40, ensemble_size=5, hidden=(64, 64))
model = dynamics.fit(data, config, seed=1)
print("NLL before / after, per member:\n", model.train_nll.round(2))

start = envs.reset(arm).values
policy = datagen.sample_random_policy(arm, 42)
a0 = datagen.policy_action(arm, policy, start)
print("one step:", dynamics.predict_step(model, start, a0)[20:])
print("member disagreement:", dynamics.predict_uncertainty(model, start, a0))

# compare a 100-step model rollout with the real environment
real = datagen.rollout_random_policy(arm, policy)
n = min(100, len(real))
pred = dynamics.rollout_model(model, arm, policy, start, n)
truth = real.states[:n + 1]
for h in (1, 20, n):
    print(h, dynamics.prediction_error(pred[:h + 1], truth[:h + 1]),
          dynamics.prediction_error(pred[:h + 1], truth[:h + 1], dims=arm.outcome_dims))
