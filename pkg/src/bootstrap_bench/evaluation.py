"""Replay an evaluation suite on a trained model and score it against ground truth."""
from dataclasses import dataclass

import numpy as np

from .dynamics import rollout_batch


@dataclass
class TrajectoryErrors:
    horizon: int
    trajectory_id: int
    error: float
    outcome_error: float
    diverged: bool


def resolve_horizons(horizons, spec):
    """Horizon tokens may be integers or ``"H"`` for the task horizon."""
    out = []
    for h in horizons:
        h = spec.horizon if h in ("H", "h") else int(h)
        out.append(h)
    return out


def evaluate_suite(model, spec, suite, horizons):
    """Per-trajectory errors for every horizon.

    Each suite policy is replayed on the model from its episode's first state;
    horizon ``h`` compares the first ``min(h, len(episode))`` predicted steps
    against the stored episode.  A rollout that goes non-finite within the
    compared window gets the capped error ``diameter * h``.
    """
    horizons = resolve_horizons(horizons, spec)
    n_steps = max(min(max(horizons), len(e.episode)) for e in suite)
    starts = np.array([e.episode.states[0] for e in suite])
    pred, diverged_at = rollout_batch(model, spec, [e.policy for e in suite], starts, n_steps)
    outcome = list(spec.outcome_dims)
    rows = []
    for h in horizons:
        for j, entry in enumerate(suite):
            truth = entry.episode.states
            steps = min(h, len(truth) - 1)
            if 0 <= diverged_at[j] <= steps:
                cap = spec.diameter * h
                rows.append(TrajectoryErrors(h, j, cap, cap, True))
                continue
            diff = pred[j, 1:steps + 1] - truth[1:steps + 1]
            err = float(np.mean(np.sqrt(np.sum(diff ** 2, axis=1))))
            out_err = float(np.mean(np.sqrt(np.sum(diff[:, outcome] ** 2, axis=1))))
            rows.append(TrajectoryErrors(h, j, err, out_err, False))
    return rows
