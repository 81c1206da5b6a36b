"""JSON run configuration shared by every command-line entry point.

Keys mirror the fields of the types they configure::

    {
      "seed": 0,
      "anthropometrics": {"l_a": 0.3, ...},
      "ukf": {"ut_alpha": 1.0, "rho": [...], "lambda": [...], ...},
      "train": {"learning_rate": 0.005, "epochs": 30, ...},
      "data": {"counts": {"A": 132, "B": 144, "C": 152}, "N": 50, "M": 50, "stride": 10},
      "eval": {"windows_per_class": 40, "K": 10}
    }

Every section and key is optional; omitted values take the defaults below.
"""

import json
from dataclasses import dataclass, field, fields

import numpy as np

from .datagen import CLASSES, DEFAULT_COUNTS, T_S
from .errors import ConfigError
from .kinematics import Anthropometrics
from .seqmodel import TrainConfig
from .ukf import UkfConfig

# stream indices for seeds derived from the run seed
_STREAMS = {"pose": 1, "force": 2, "eval": 3}


@dataclass
class DataConfig:
    counts: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    N: int = 50
    M: int = 50
    stride: int = 10

    def __post_init__(self):
        unknown = set(self.counts) - set(CLASSES)
        if unknown:
            raise ValueError(f"unknown motion classes {sorted(unknown)}")
        if any(int(v) < 0 for v in self.counts.values()):
            raise ValueError("counts must be non-negative")
        if min(self.N, self.M) < 3 or self.stride < 1:
            raise ValueError("N and M must be at least 3 and stride at least 1")


@dataclass
class EvalConfig:
    windows_per_class: int = 40
    K: int = 10

    def __post_init__(self):
        if self.windows_per_class < 1:
            raise ValueError("windows_per_class must be at least 1")
        if self.K < 2:
            raise ValueError("K must be at least 2")


@dataclass
class RunConfig:
    seed: int = 0
    anthropometrics: Anthropometrics = field(default_factory=Anthropometrics)
    ukf: UkfConfig = field(default_factory=UkfConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def derived_seed(self, stream):
        """Seed of one named random stream (``pose``, ``force``, ``eval``)."""
        ss = np.random.SeedSequence([int(self.seed), _STREAMS[stream]])
        return int(ss.generate_state(1)[0])

    def train_config(self, kind):
        d = {f.name: getattr(self.train, f.name) for f in fields(TrainConfig)}
        d["seed"] = self.derived_seed(kind)
        return TrainConfig(**d)

    def to_dict(self):
        train = {f.name: getattr(self.train, f.name) for f in fields(TrainConfig) if f.name != "seed"}
        return {
            "seed": int(self.seed),
            "anthropometrics": self.anthropometrics.to_dict(),
            "ukf": self.ukf.to_dict(),
            "train": train,
            "data": {"counts": dict(self.data.counts), "N": self.data.N, "M": self.data.M,
                     "stride": self.data.stride},
            "eval": {"windows_per_class": self.eval.windows_per_class, "K": self.eval.K},
        }


def _section(d, name, allowed):
    sub = d.get(name, {})
    if not isinstance(sub, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    unknown = set(sub) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return sub


def from_dict(d):
    """Validate a parsed config document and fill in defaults.

    Raises
    ------
    ConfigError
        On unknown keys, wrong types or values violating a type invariant.
    """
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - {"seed", "anthropometrics", "ukf", "train", "data", "eval"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    try:
        anthro_d = _section(d, "anthropometrics", [f.name for f in fields(Anthropometrics)])
        ukf_keys = [f.name for f in fields(UkfConfig) if f.name != "lambda_"] + ["lambda"]
        ukf_d = dict(_section(d, "ukf", ukf_keys))
        train_d = _section(d, "train", [f.name for f in fields(TrainConfig) if f.name != "seed"])
        data_d = _section(d, "data", [f.name for f in fields(DataConfig)])
        eval_d = _section(d, "eval", [f.name for f in fields(EvalConfig)])
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        # rho defaults depend on the sample time
        if "T_s" not in ukf_d:
            ukf_d["T_s"] = T_S
        return RunConfig(
            seed=seed,
            anthropometrics=Anthropometrics.from_dict(anthro_d),
            ukf=UkfConfig.from_dict(ukf_d),
            train=TrainConfig(**train_d),
            data=DataConfig(**data_d),
            eval=EvalConfig(**eval_d),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load(path):
    """Read and validate a JSON config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return from_dict(d)


def dumps(cfg):
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
