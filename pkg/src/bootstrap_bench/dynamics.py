"""Probabilistic ensemble dynamics model.

Each member maps a normalized ``[state, action]`` to a Gaussian over the
normalized state delta.  Point predictions average the member means.
"""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .datagen import ActionSchedule, derive_seed
from .errors import ConfigError, RolloutError, ShapeError, UsageError
from .nn import (FlatAdam, MlpParams, backward, forward_cache, gaussian_head,
                 gaussian_nll, mlp_init)

MODEL_FORMAT_VERSION = 1
STD_FLOOR = 1e-8


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 64
    learning_rate: float = 1e-3
    ensemble_size: int = 5
    bootstrap_fraction: float = 1.0
    hidden: tuple = (64, 64)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigError("epochs, batch_size and learning_rate must be positive")
        if self.ensemble_size < 2:
            raise ConfigError("an ensemble needs at least 2 members")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise ConfigError("bootstrap_fraction must lie in (0, 1]")


@dataclass
class EnsembleModel:
    params: MlpParams          # stacked over members
    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray
    state_dim: int
    action_dim: int
    config: TrainConfig
    seed: int
    train_nll: np.ndarray      # (members, 2): NLL on own resample before / after training
    meta: dict = field(default_factory=dict)

    @property
    def n_members(self):
        return self.params.weights[0].shape[0]

    def normalize(self, x):
        return (x - self.in_mean) / self.in_std

    def denormalize(self, z):
        return z * self.in_std + self.in_mean


def _column_stats(x):
    # fsum makes the statistics independent of sample order
    n = len(x)
    mean = np.array([math.fsum(col) / n for col in x.T])
    var = np.array([math.fsum((col - m) ** 2) / n for col, m in zip(x.T, mean)])
    return mean, np.maximum(np.sqrt(var), STD_FLOOR)


def resample_indices(n_samples, config, seed):
    """Per-member bootstrap draws (with replacement)."""
    rng = np.random.default_rng(derive_seed(seed, 1))
    n_draws = max(1, int(round(config.bootstrap_fraction * n_samples)))
    return rng.integers(0, n_samples, size=(config.ensemble_size, n_draws))


def _member_nll(params, x, y):
    _, acts = forward_cache(params, x)
    return np.mean(gaussian_nll(gaussian_head(acts[-1]), y), axis=-1)


def fit(dataset, config=None, seed=0, indices=None):
    """Train every member on its own bootstrap resample by minimizing Gaussian NLL.

    ``indices`` overrides the resample drawn from ``seed`` (one row per member).
    """
    config = config or TrainConfig()
    n = len(dataset)
    if n == 0:
        raise UsageError("cannot fit a model on an empty dataset")
    sd, ad = dataset.states.shape[1], dataset.actions.shape[1]
    inputs = np.hstack([dataset.states, dataset.actions])
    deltas = dataset.next_states - dataset.states
    in_mean, in_std = _column_stats(inputs)
    out_mean, out_std = _column_stats(deltas)
    x = (inputs - in_mean) / in_std
    y = (deltas - out_mean) / out_std

    if indices is None:
        indices = resample_indices(n, config, seed)
    indices = np.asarray(indices)
    if indices.shape[0] != config.ensemble_size:
        raise ShapeError("need one row of resample indices per member")
    m, n_draws = indices.shape
    sizes = (sd + ad,) + config.hidden + (2 * sd,)
    params = mlp_init(sizes, "tanh", derive_seed(seed, 0), members=m)
    opt = FlatAdam(params)
    params = opt.params
    shuffle_rng = np.random.default_rng(derive_seed(seed, 2))
    rows = np.arange(m)[:, None]

    nll_before = _member_nll(params, x[indices], y[indices])
    bs = min(config.batch_size, n_draws)
    for _ in range(config.epochs):
        order = np.argsort(shuffle_rng.random((m, n_draws)), axis=1)
        epoch_idx = indices[rows, order]
        for start in range(0, n_draws, bs):
            batch = epoch_idx[:, start:start + bs]
            _, grads = backward(params, x[batch], y[batch], loss="gaussian_nll")
            opt.step(grads, config.learning_rate)
    nll_after = _member_nll(params, x[indices], y[indices])
    params = params.copy()

    return EnsembleModel(params, in_mean, in_std, out_mean, out_std, sd, ad, config,
                         int(seed), np.stack([nll_before, nll_after], axis=1))


def member_deltas(model, states, actions):
    """De-normalized mean delta of every member: ``(members, N, state_dim)``."""
    x = model.normalize(np.hstack([states, actions]))
    _, acts = forward_cache(model.params, x[None])
    mean = acts[-1][..., :model.state_dim]
    return mean * model.out_std + model.out_mean


def _check_inputs(model, state, action):
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if state.shape[-1] != model.state_dim or action.shape[-1] != model.action_dim:
        raise ShapeError("state/action dimensions do not match the model")
    if not (np.all(np.isfinite(state)) and np.all(np.isfinite(action))):
        raise UsageError("non-finite model input")
    return state, action


def predict_step(model, state, action):
    state, action = _check_inputs(model, state, action)
    single = state.ndim == 1
    s, a = np.atleast_2d(state), np.atleast_2d(action)
    nxt = s + member_deltas(model, s, a).mean(axis=0)
    return nxt[0] if single else nxt


def predict_uncertainty(model, state, action):
    """Mean over dims of the (population) variance of member mean deltas."""
    state, action = _check_inputs(model, state, action)
    d = member_deltas(model, np.atleast_2d(state), np.atleast_2d(action))
    # variance is shift invariant; centring on one member makes equal members give exactly 0
    return float(np.mean(np.var(d - d[:1], axis=0)))


def _stack_policies(policies):
    first = policies[0]
    return MlpParams(first.layer_sizes,
                     [np.stack([p.weights[i] for p in policies]) for i in range(first.n_layers)],
                     [np.stack([p.biases[i] for p in policies]) for i in range(first.n_layers)],
                     first.activation)


def rollout_model(model, spec, controller, start_state, n_steps):
    """Recursive model rollout; returns ``(n_steps + 1, state_dim)`` predicted states."""
    if n_steps < 1:
        raise ConfigError("n_steps must be >= 1")
    traj, diverged_at = rollout_batch(model, spec, [controller], np.asarray(start_state)[None], n_steps)
    if diverged_at[0] >= 0:
        raise RolloutError("model rollout diverged", int(diverged_at[0]))
    return traj[0]


def rollout_batch(model, spec, controllers, start_states, n_steps):
    """Roll out many controllers at once.

    Controllers are all policies or all action schedules.  Returns the
    ``(P, n_steps + 1, state_dim)`` predictions and, per rollout, the first
    step whose prediction was non-finite (``-1`` if none).  Diverged rollouts
    are NaN from that step on.
    """
    start_states = np.asarray(start_states, dtype=np.float64)
    p = len(controllers)
    traj = np.full((p, n_steps + 1, model.state_dim), np.nan)
    traj[:, 0] = start_states
    diverged_at = np.full(p, -1)
    schedules = isinstance(controllers[0], ActionSchedule)
    stacked = None if schedules else _stack_policies(controllers)
    s = start_states.copy()
    for t in range(n_steps):
        alive = diverged_at < 0
        if schedules:
            a = np.stack([c.action_at(t) for c in controllers])
        else:
            _, acts = forward_cache(stacked, np.where(alive[:, None], s, 0.0)[:, None, :])
            raw = acts[-1][:, 0, :]
            a = spec.action_low + 0.5 * (np.tanh(raw) + 1.0) * (spec.action_high - spec.action_low)
        safe = np.where(alive[:, None], s, 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = safe + member_deltas(model, safe, a).mean(axis=0)
        bad = alive & ~np.all(np.isfinite(nxt), axis=1)
        diverged_at[bad] = t + 1
        alive = diverged_at < 0
        s = np.where(alive[:, None], nxt, np.nan)
        traj[:, t + 1] = s
    return traj, diverged_at


def prediction_error(predicted, truth, dims=None):
    """Mean over steps t >= 1 of the Euclidean state error."""
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape:
        raise UsageError(f"trajectory shapes differ: {predicted.shape} vs {truth.shape}")
    if predicted.ndim != 2 or len(predicted) < 2:
        raise UsageError("trajectories need at least two states")
    diff = predicted[1:] - truth[1:]
    if dims is not None:
        diff = diff[:, list(dims)]
    return float(np.mean(np.sqrt(np.sum(diff ** 2, axis=1))))


def save_model(model, path):
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(model.params.layer_sizes),
        "activation": model.params.activation,
        "state_dim": model.state_dim,
        "action_dim": model.action_dim,
        "config": asdict(model.config),
        "seed": model.seed,
        "meta": model.meta,
    }
    arrays = {f"p{i}": a for i, a in enumerate(model.params.arrays())}
    np.savez(path, header=np.array(json.dumps(header, sort_keys=True)),
             in_mean=model.in_mean, in_std=model.in_std, out_mean=model.out_mean,
             out_std=model.out_std, train_nll=model.train_nll, **arrays)


def load_model(path):
    with np.load(path) as f:
        header = json.loads(str(f["header"]))
        if header.get("format_version") != MODEL_FORMAT_VERSION:
            raise ConfigError(f"unsupported model format {header.get('format_version')}")
        n_arrays = 2 * (len(header["layer_sizes"]) - 1)
        arrays = [f[f"p{i}"] for i in range(n_arrays)]
        params = MlpParams(header["layer_sizes"], arrays[0::2], arrays[1::2], header["activation"])
        return EnsembleModel(params, f["in_mean"], f["in_std"], f["out_mean"], f["out_std"],
                             header["state_dim"], header["action_dim"],
                             TrainConfig(**header["config"]), header["seed"], f["train_nll"],
                             header.get("meta", {}))
