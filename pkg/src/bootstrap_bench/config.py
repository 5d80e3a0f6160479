"""Experiment configuration and its flat ``key = value`` text format.

Values are JSON literals (numbers, quoted strings, lists).  Blank lines and
lines starting with ``#`` are ignored.  Unknown keys are rejected.
"""
import json
from dataclasses import asdict, dataclass, field, fields

from . import envs
from .datagen import DEFAULT_REPEAT, METHODS
from .dynamics import TrainConfig
from .errors import ConfigError
from .novelty import NsConfig


@dataclass
class ExperimentConfig:
    env: str = "ball_in_cup"
    methods: list = field(default_factory=lambda: list(METHODS))
    budgets: list = field(default_factory=lambda: [5, 10, 15, 20])
    horizons: list = field(default_factory=lambda: [1, 20, "H"])
    repetitions: int = 10
    repeat_length: int = DEFAULT_REPEAT
    train: TrainConfig = field(default_factory=TrainConfig)
    ns: NsConfig = field(default_factory=NsConfig)
    suite_size: int = 50
    master_seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        spec = envs.make_spec(self.env)
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ConfigError(f"unknown methods {sorted(unknown)}")
        if not self.budgets or any(int(b) < 1 for b in self.budgets):
            raise ConfigError("budgets must be positive")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        for h in self.horizons:
            if h not in ("H",) and not 1 <= int(h) <= spec.horizon:
                raise ConfigError(f"horizon {h} outside [1, {spec.horizon}]")
        if spec.horizon % self.repeat_length:
            raise ConfigError(f"horizon {spec.horizon} is not divisible by R={self.repeat_length}")
        if self.suite_size < 1 or self.suite_size > self.ns.generations * self.ns.archive_add_per_gen:
            raise ConfigError("suite_size must be in [1, generations * archive_add_per_gen]")

    @property
    def spec(self):
        return envs.make_spec(self.env)

    def resolved_horizons(self):
        return [self.spec.horizon if h == "H" else int(h) for h in self.horizons]

    def to_flat(self):
        flat = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "train":
                flat.update({f"train_{k}": v for k, v in asdict(value).items()})
            elif f.name == "ns":
                flat.update({f"ns_{k}": v for k, v in asdict(value).items()})
            else:
                flat[f.name] = value
        return flat

    def to_text(self):
        lines = []
        for key, value in self.to_flat().items():
            if isinstance(value, tuple):
                value = list(value)
            lines.append(f"{key} = {json.dumps(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_flat(cls, flat):
        base = {}
        train, ns = {}, {}
        names = {f.name for f in fields(cls)} - {"train", "ns"}
        train_names = {f.name for f in fields(TrainConfig)}
        ns_names = {f.name for f in fields(NsConfig)}
        for key, value in flat.items():
            if key.startswith("train_") and key[6:] in train_names:
                train[key[6:]] = value
            elif key.startswith("ns_") and key[3:] in ns_names:
                ns[key[3:]] = value
            elif key in names:
                base[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            return cls(train=TrainConfig(**train), ns=NsConfig(**ns), **base)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_text(cls, text):
        flat = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                flat[key] = json.loads(value)
            except json.JSONDecodeError:
                raise ConfigError(f"line {lineno}: cannot parse value {value!r}") from None
        return cls.from_flat(flat)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return ExperimentConfig.from_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
