"""
Three ways to gather bootstrap data
===================================

Random policies, random actions held for R steps, and RARPH, which spends
half its episodes on each.  Early stopping makes the random-policy datasets
much smaller on the walled arm; on Ball-In-Cup the policies push actions to
the limits of the box.
"""
import os
from pathlib import Path

import numpy as np

from bootstrap_bench import datagen, envs, metrics

out = Path(os.environ.get("BOOTSTRAP_BENCH_OUT", "notebook_output"))
out.mkdir(exist_ok=True)

arm = envs.make_spec("redundant_arm")
for method in datagen.METHODS:
    ds = datagen.gather(arm, method, 20, repeat_length=10, seed=0)
    reasons = {r: ds.meta["terminations"].count(r) for r in set(ds.meta["terminations"])}
    print(f"{method:15s} samples {len(ds):5d}  mean length {ds.episode_lengths.mean():6.1f}  {reasons}")

print(datagen.rarph_split(5), datagen.rarph_split(20))

# action schedules: B = H / R blocks
sched = datagen.sample_action_schedule(arm, 10, seed=3)
print(sched.num_blocks, sched.action_at(0)[:3], sched.action_at(9)[:3], sched.action_at(10)[:3])

bic = envs.make_spec("ball_in_cup")
pol = datagen.gather(bic, "random_policy", 34, seed=1)
act = datagen.gather(bic, "random_actions", 34, seed=2)
print("boundary mass:", metrics.boundary_mass(pol.actions, bic, 0.1),
      metrics.boundary_mass(act.actions, bic, 0.1))

# histograms of the first action dimension, as CSV and SVG
hists = {m: metrics.histogram(d.actions[:, 0], 30, (-1, 1), "action_0")
         for m, d in (("random_policy", pol), ("random_actions", act))}
(out / "bic_action_0.csv").write_text(metrics.histogram_csv(hists))
(out / "bic_action_0.svg").write_text(metrics.histogram_svg(hists, "ball_in_cup: action_0"))
print(metrics.histogram_csv(hists).splitlines()[:3])

# datasets round-trip through npz files
datagen.save_dataset(pol, out / "bic_policy.npz")
print(len(datagen.load_dataset(out / "bic_policy.npz")))
