"""
A complete, small experiment
============================

``run_experiment`` ties everything together: it builds (or reloads) the
evaluation suite, runs every (repetition, method, budget) cell, and writes
errors.csv, table.csv/txt, histograms and a manifest.  The same run from a
shell is ``bootstrap-bench run --config my.cfg --out DIR``.
"""
import json
import os
from pathlib import Path

from bootstrap_bench import harness
from bootstrap_bench.config import ExperimentConfig

out = Path(os.environ.get("BOOTSTRAP_BENCH_OUT", "notebook_output")) / "small_run"

config = ExperimentConfig.from_text("""
env = "redundant_arm"
budgets = [2, 5]
repetitions = 3
train_epochs = 20
ns_population_size = 20
ns_generations = 5
suite_size = 15
""")
print(config.to_text())

manifest = harness.run_experiment(config, jobs=1, out_dir=out, log=print)
print((out / "table.txt").read_text())
print(json.dumps(manifest["mean_episode_length"], indent=1))
print(manifest["boundary_mass"])

# a second call finds every cell on disk and only re-aggregates
again = harness.run_experiment(config, out_dir=out)
print(again["cells_cached"], "cached,", again["cells_run"], "recomputed")
