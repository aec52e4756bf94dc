"""Run configuration: defaults, the hyperparameter grid, and the flat YAML config file."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

# hyperparameter search intervals, keyed like RunConfig fields
GRID = {
    "learning_rate": [0.0001, 0.0005, 0.001, 0.005],
    "batch_size": [128, 256, 512, 1024],
    "gcn_layers": [1, 2, 3, 4, 5],
    "drug_dim": [64, 128, 256, 512],
    "target_dim": [64, 128, 256, 512],
    "alpha": [0, 0.01, 0.1, 0.5, 1],
    "beta": [0, 0.01, 0.1, 0.5, 1],
}
REQUIRED_IN_FILE = ("epsilon", "tau")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    learning_rate: float = 0.0005
    batch_size: int = 512
    gcn_layers: int = 3
    drug_dim: int = 128
    target_dim: int = 128
    alpha: float = 0.5
    beta: float = 0.5
    epsilon: float = 0.1
    tau: float = 0.2
    epochs: int = 1000
    seed: int = 0
    precision: str = "float64"
    max_protein_length: int = 1000
    embed_dim: int = 128
    conv_channels: list[int] = field(default_factory=lambda: [32, 64, 96])
    kernel_size: int = 8
    cosine_similarity: bool = False
    uniformity_on_sphere: bool = True
    fold: int = 0
    drugs: str = ""
    targets: str = ""
    affinities: str = ""
    dataset_name: str = "dataset"
    transform: str = "none"
    out_dir: str = "runs"

    def __post_init__(self):
        self.validate()

    @property
    def dtype(self):
        import numpy as np
        return np.float32 if self.precision == "float32" else np.float64

    def validate(self) -> None:
        checks = [
            (self.learning_rate > 0, "learning_rate must be > 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.gcn_layers >= 1, "gcn_layers must be >= 1"),
            (self.drug_dim >= 1 and self.target_dim >= 1, "representation dims must be >= 1"),
            (self.alpha >= 0 and self.beta >= 0, "alpha and beta must be >= 0"),
            (self.epsilon >= 0, "epsilon must be >= 0"),
            (self.tau > 0, "tau must be > 0"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.precision in ("float32", "float64"), "precision must be float32 or float64"),
            (len(self.conv_channels) >= 1 and self.kernel_size >= 1, "conv layers need channels and kernel"),
            (self.max_protein_length > len(self.conv_channels) * (self.kernel_size - 1),
             "max_protein_length must exceed total kernel shrinkage"),
            (0 <= self.fold < 5, "fold must be in 0..4"),
            (self.transform in ("none", "pkd"), "transform must be none or pkd"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects the numbers (paths excluded)."""
        d = self.to_dict()
        for key in ("out_dir", "drugs", "targets", "affinities"):
            d.pop(key)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def load_config(path, **overrides) -> RunConfig:
    """Read a flat YAML mapping; unknown keys and missing epsilon/tau are errors."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a flat key-value mapping")
    unknown = sorted(set(raw) - set(FIELDS))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    missing = [k for k in REQUIRED_IN_FILE if k not in raw]
    if missing:
        raise ConfigError(f"{path}: mandatory keys missing {missing}")
    for key, value in raw.items():
        if isinstance(value, (dict,)) or (isinstance(value, list) and key != "conv_channels"):
            raise ConfigError(f"{path}: key {key} must be a scalar")
    # relative data paths resolve against the config file
    for key in ("drugs", "targets", "affinities"):
        if raw.get(key) and not Path(raw[key]).is_absolute():
            raw[key] = str((path.parent / raw[key]).resolve())
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**_coerce(raw))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def _coerce(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        kind = FIELDS[key].type
        try:
            if kind == "int":
                if isinstance(value, float) and not value.is_integer():
                    raise ValueError
                out[key] = int(value)
            elif kind == "float":
                out[key] = float(value)
            elif kind == "bool":
                if not isinstance(value, bool):
                    raise ValueError
                out[key] = value
            elif kind == "str":
                out[key] = str(value)
            else:
                out[key] = [int(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"key {key}: cannot interpret {value!r} as {kind}") from None
    return out


def dump_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
