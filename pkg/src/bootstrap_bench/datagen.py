"""Bootstrap data gathering: random policies, random actions and their hybrid."""
import json
from dataclasses import dataclass, field

import numpy as np

from . import envs
from .errors import ConfigError, ShapeError
from .nn import MlpParams, mlp_forward

METHODS = ("random_policy", "random_actions", "rarph")
POLICY_HIDDEN = (10, 10)
# Policy weights and biases are drawn uniformly in [-POLICY_PARAM_RANGE, +POLICY_PARAM_RANGE].
POLICY_PARAM_RANGE = 1.0
DEFAULT_REPEAT = 10


def derive_seed(*keys):
    """Mix integer keys into one 64-bit seed (order-sensitive, collision-resistant)."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class Episode:
    states: np.ndarray        # (T + 1, state_dim)
    actions: np.ndarray       # (T, action_dim)
    termination_reason: str
    source_method: str

    def __len__(self):
        return len(self.actions)

    @property
    def transitions(self):
        return [(self.states[t], self.actions[t], self.states[t + 1]) for t in range(len(self))]


@dataclass
class ActionSchedule:
    repeat_length: int
    block_actions: np.ndarray  # (B, action_dim)

    @property
    def num_blocks(self):
        return len(self.block_actions)

    def action_at(self, t):
        return self.block_actions[t // self.repeat_length]


@dataclass
class Dataset:
    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    episode_starts: np.ndarray          # offsets into the pool, one per episode
    episode_sources: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    @property
    def episode_lengths(self):
        ends = np.append(self.episode_starts[1:], len(self))
        return ends - self.episode_starts

    @classmethod
    def from_episodes(cls, episodes, meta=None):
        if not episodes:
            raise ConfigError("a dataset needs at least one episode")
        lengths = [len(e) for e in episodes]
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)
        return cls(
            states=np.concatenate([e.states[:-1] for e in episodes]),
            actions=np.concatenate([e.actions for e in episodes]),
            next_states=np.concatenate([e.states[1:] for e in episodes]),
            episode_starts=starts,
            episode_sources=[e.source_method for e in episodes],
            meta=dict(meta or {}),
        )


def sample_random_policy(spec, seed):
    rng = np.random.default_rng(seed)
    sizes = (spec.state_dim,) + POLICY_HIDDEN + (spec.action_dim,)
    r = POLICY_PARAM_RANGE
    weights = [rng.uniform(-r, r, size=(o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
    biases = [rng.uniform(-r, r, size=o) for o in sizes[1:]]
    return MlpParams(sizes, weights, biases, "tanh")


def policy_action(spec, policy, state_values):
    """tanh-squashed network output mapped affinely onto the action box."""
    raw = mlp_forward(policy, state_values)
    return spec.action_low + 0.5 * (np.tanh(raw) + 1.0) * (spec.action_high - spec.action_low)


def _run(spec, choose_action, source):
    state = envs.reset(spec)
    states, actions = [state.values], []
    while state.step_index < spec.horizon and not state.terminated:
        a = np.clip(choose_action(state), spec.action_low, spec.action_high)
        state = envs.step(spec, state, a)
        states.append(state.values)
        actions.append(a)
    return Episode(np.array(states), np.array(actions).reshape(-1, spec.action_dim),
                   state.termination, source)


def rollout_random_policy(spec, policy):
    if policy.layer_sizes[0] != spec.state_dim or policy.layer_sizes[-1] != spec.action_dim:
        raise ShapeError("policy dimensions do not match the environment")
    return _run(spec, lambda s: policy_action(spec, policy, s.values), "random_policy")


def sample_action_schedule(spec, repeat_length, seed):
    repeat_length = int(repeat_length)
    if repeat_length < 1 or spec.horizon % repeat_length:
        raise ConfigError(f"horizon {spec.horizon} is not divisible by R={repeat_length}")
    rng = np.random.default_rng(seed)
    blocks = rng.uniform(spec.action_low, spec.action_high,
                         size=(spec.horizon // repeat_length, spec.action_dim))
    return ActionSchedule(repeat_length, blocks)


def rollout_random_actions(spec, schedule):
    if schedule.num_blocks * schedule.repeat_length != spec.horizon:
        raise ConfigError("schedule does not cover the task horizon")
    return _run(spec, lambda s: schedule.action_at(s.step_index), "random_actions")


def rarph_split(total_episodes):
    """Even split; an odd extra episode goes to random policies."""
    if total_episodes < 1:
        raise ConfigError("total_episodes must be >= 1")
    n_action = total_episodes // 2
    return total_episodes - n_action, n_action


def episode_plan(method, n_episodes):
    """Source method of each episode, in gathering order."""
    if method == "random_policy":
        return ["random_policy"] * n_episodes
    if method == "random_actions":
        return ["random_actions"] * n_episodes
    if method == "rarph":
        n_pol, n_act = rarph_split(n_episodes)
        return ["random_policy"] * n_pol + ["random_actions"] * n_act
    raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")


def gather_episode(spec, source, repeat_length, seed):
    if source == "random_policy":
        return rollout_random_policy(spec, sample_random_policy(spec, seed))
    return rollout_random_actions(spec, sample_action_schedule(spec, repeat_length, seed))


def gather(spec, method, n_episodes, repeat_length=DEFAULT_REPEAT, seed=0):
    """Collect ``n_episodes`` episodes; episode i uses ``derive_seed(seed, i)``."""
    if n_episodes < 1:
        raise ConfigError("n_episodes must be >= 1")
    plan = episode_plan(method, n_episodes)
    if "random_actions" in plan and spec.horizon % repeat_length:
        raise ConfigError(f"horizon {spec.horizon} is not divisible by R={repeat_length}")
    seeds = [derive_seed(seed, i) for i in range(n_episodes)]
    episodes = [gather_episode(spec, src, repeat_length, s) for src, s in zip(plan, seeds)]
    meta = {"env": spec.name, "method": method, "repeat_length": int(repeat_length),
            "seed": int(seed), "episode_seeds": seeds,
            "terminations": [e.termination_reason for e in episodes]}
    return Dataset.from_episodes(episodes, meta)


DATASET_FORMAT_VERSION = 1


def save_dataset(dataset, path):
    header = dict(dataset.meta, format_version=DATASET_FORMAT_VERSION,
                  episode_starts=dataset.episode_starts.tolist(),
                  episode_sources=list(dataset.episode_sources))
    np.savez(path, header=np.array(json.dumps(header, sort_keys=True)), states=dataset.states,
             actions=dataset.actions, next_states=dataset.next_states)


def load_dataset(path):
    with np.load(path) as f:
        header = json.loads(str(f["header"]))
        if header.pop("format_version", None) != DATASET_FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported dataset format")
        starts = np.array(header.pop("episode_starts"), dtype=np.int64)
        sources = header.pop("episode_sources")
        return Dataset(f["states"], f["actions"], f["next_states"], starts, sources, header)
