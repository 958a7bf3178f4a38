from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

from ..blocks import ConfigError
from ..network import ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    epochs: int = 500
    lr_start: float = 1e-3
    lr_end: float = 1e-5
    batch_size: int = 16
    patch_size: int = 128
    seed: int = 0
    loss_weights: tuple = (1.0, 1.0, 1.0)
    eval_every: int = 1
    checkpoint_dir: str = "checkpoints"
    data_root: str | None = None
    train_n: int | None = None  # None -> 70% of the pairs
    val_n: int | None = None  # None -> the remainder
    augment: bool = True

    def __post_init__(self):
        object.__setattr__(self, "loss_weights", tuple(float(w) for w in self.loss_weights))
        if len(self.loss_weights) != 3:
            raise ConfigError("loss_weights needs exactly three entries")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.lr_start >= self.lr_end > 0):
            raise ConfigError(f"need lr_start >= lr_end > 0, got {self.lr_start}, {self.lr_end}")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.patch_size < 8 or self.patch_size % 8:
            raise ConfigError(f"patch_size must be a positive multiple of 8, got {self.patch_size}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "model" in d:
            d["model"] = ModelConfig.from_dict(d["model"])
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        d["loss_weights"] = list(self.loss_weights)
        return d

    def with_model(self, **changes) -> "TrainConfig":
        return replace(self, model=replace(self.model, **changes))


def load_config(path) -> TrainConfig:
    """Read a JSON config; ``DEMOIRE_SEED`` in the environment overrides ``seed``."""
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    cfg = TrainConfig.from_dict(raw)
    env_seed = os.environ.get("DEMOIRE_SEED")
    if env_seed is not None:
        try:
            cfg = replace(cfg, seed=int(env_seed))
        except ValueError as e:
            raise ConfigError(f"DEMOIRE_SEED must be an integer, got {env_seed!r}") from e
    return cfg


def config_diff(a: dict, b: dict, prefix="") -> dict:
    """Flat ``{dotted.key: (a_value, b_value)}`` for every differing leaf."""
    out = {}
    for k in sorted(set(a) | set(b)):
        va, vb = a.get(k), b.get(k)
        if isinstance(va, dict) and isinstance(vb, dict):
            out.update(config_diff(va, vb, f"{prefix}{k}."))
        elif va != vb:
            out[f"{prefix}{k}"] = (va, vb)
    return out
