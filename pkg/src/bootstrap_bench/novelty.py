"""Novelty Search over random-policy networks, used to build evaluation suites."""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import envs
from .datagen import Episode, derive_seed, rollout_random_policy, sample_random_policy
from .errors import ConfigError, UsageError
from .nn import MlpParams

ARCHIVE_FORMAT_VERSION = 1
TOURNAMENT_SIZE = 3


@dataclass
class NsConfig:
    population_size: int = 50
    generations: int = 20
    k_nearest: int = 15
    mutation_std: float = 0.1
    archive_add_per_gen: int = 3

    def __post_init__(self):
        if min(self.population_size, self.k_nearest, self.archive_add_per_gen) < 1:
            raise ConfigError("NS sizes must be positive")
        if self.generations < 0 or self.mutation_std <= 0:
            raise ConfigError("generations must be >= 0 and mutation_std > 0")
        if self.archive_add_per_gen > self.population_size:
            raise ConfigError("cannot archive more individuals than the population holds")


@dataclass
class ArchiveEntry:
    policy: MlpParams
    episode: Episode
    descriptor: np.ndarray


@dataclass
class NsArchive:
    env: str
    entries: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def descriptors(self):
        return np.array([e.descriptor for e in self.entries])


def novelty_score(b, pool, k):
    """Mean Euclidean distance from ``b`` to its ``k`` nearest neighbours in ``pool``."""
    pool = np.asarray(pool, dtype=np.float64)
    if pool.size == 0:
        raise UsageError("empty neighbour pool")
    if k < 1:
        raise ConfigError("k must be >= 1")
    pool = pool.reshape(len(pool), -1)
    dist = np.sqrt(np.sum((pool - np.asarray(b, dtype=np.float64)) ** 2, axis=1))
    k = min(k, len(dist))
    return float(np.mean(np.partition(dist, k - 1)[:k]))


def _evaluate(spec, policies):
    out = []
    for pol in policies:
        ep = rollout_random_policy(spec, pol)
        out.append((pol, ep, envs.observer(spec, ep.states).values))
    return out


def _mutate(policy, std, rng):
    arrays = [a + rng.normal(0.0, std, size=a.shape) for a in policy.arrays()]
    return policy.with_arrays(arrays)


def evolve(spec, config=None, seed=0):
    config = config or NsConfig()
    rng = np.random.default_rng(derive_seed(seed, 0))
    population = [sample_random_policy(spec, derive_seed(seed, 1, i))
                  for i in range(config.population_size)]
    evaluated = _evaluate(spec, population)
    archive = NsArchive(spec.name, meta={"config": asdict(config), "seed": int(seed)})
    for _ in range(config.generations):
        pop_desc = np.array([d for _, _, d in evaluated])
        arch_desc = archive.descriptors().reshape(-1, pop_desc.shape[1])
        scores = np.empty(len(evaluated))
        for i in range(len(evaluated)):
            others = np.vstack([np.delete(pop_desc, i, axis=0), arch_desc])
            scores[i] = novelty_score(pop_desc[i], others, config.k_nearest)
        # stable sort: ties go to the lower population index
        best = np.argsort(-scores, kind="stable")[:config.archive_add_per_gen]
        for i in best:
            pol, ep, d = evaluated[i]
            archive.entries.append(ArchiveEntry(pol, ep, d))
        children = []
        for _ in range(config.population_size):
            contestants = rng.choice(len(evaluated), size=TOURNAMENT_SIZE, replace=False)
            winner = contestants[np.argmax(scores[contestants])]
            children.append(_mutate(evaluated[winner][0], config.mutation_std, rng))
        evaluated = _evaluate(spec, children)
    return archive


def evaluation_suite(archive, n, seed=0):
    """``n`` archive entries drawn without replacement, in archive order."""
    if n > len(archive):
        raise UsageError(f"suite of {n} requested from an archive of {len(archive)}")
    if n == len(archive):
        return list(archive.entries)
    rng = np.random.default_rng(derive_seed(seed, 7))
    chosen = np.sort(rng.choice(len(archive), size=n, replace=False))
    return [archive.entries[i] for i in chosen]


def save_archive(archive, path):
    header = {"format_version": ARCHIVE_FORMAT_VERSION, "env": archive.env, "meta": archive.meta,
              "entries": [{"layer_sizes": list(e.policy.layer_sizes),
                           "termination": e.episode.termination_reason} for e in archive.entries]}
    arrays = {}
    for j, e in enumerate(archive.entries):
        for i, a in enumerate(e.policy.arrays()):
            arrays[f"e{j}_p{i}"] = a
        arrays[f"e{j}_states"] = e.episode.states
        arrays[f"e{j}_actions"] = e.episode.actions
        arrays[f"e{j}_desc"] = e.descriptor
    np.savez(path, header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_archive(path):
    with np.load(path) as f:
        header = json.loads(str(f["header"]))
        if header.get("format_version") != ARCHIVE_FORMAT_VERSION:
            raise ConfigError(f"unsupported archive format {header.get('format_version')}")
        entries = []
        for j, info in enumerate(header["entries"]):
            sizes = info["layer_sizes"]
            arrays = [f[f"e{j}_p{i}"] for i in range(2 * (len(sizes) - 1))]
            policy = MlpParams(sizes, arrays[0::2], arrays[1::2], "tanh")
            ep = Episode(f[f"e{j}_states"], f[f"e{j}_actions"], info["termination"], "random_policy")
            entries.append(ArchiveEntry(policy, ep, f[f"e{j}_desc"]))
    return NsArchive(header["env"], entries, header["meta"])
