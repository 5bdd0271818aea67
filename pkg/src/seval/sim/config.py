"""Run configuration: dataclasses plus JSON/TOML loading with field-level errors."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..curriculum import CurriculumConfig
from ..offsets import OffsetFitConfig
from ..synthdata import SynthSpec
from ..thresholds import ThresholdFitConfig
from .model import MODEL_KINDS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

METHODS = ("seval", "fixed_threshold", "la", "da", "flex_like")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    method: str = "seval"
    total_iters: int = 20_000
    seed: int = 0
    batch_labeled: int = 64
    batch_unlabeled: int = 128
    lr: float = 0.03
    ema_decay: float = 0.99
    unlabeled_weight: float = 1.0
    tau: float = 0.95
    la_lambda: float = 1.0
    model_kind: str = "mlp"
    hidden_width: int = 64
    weak_sd: float = 0.05
    strong_sd: float = 0.3
    drop_prob: float = 0.2
    curriculum_L: int = 50
    eta_pi: float = 0.9
    eta_tau: float = 0.9
    target_t: float = 0.75
    group_size: int = 1
    e1: int = 10
    e2: int = 10
    pi_floor_rule: bool = True
    offset_class_weight: str = "none"
    refine_thresholds: bool = True
    stratified_partition: bool = True
    eval_interval: int = 200

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"train.method must be one of {METHODS}, got {self.method!r}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"train.model_kind must be one of {MODEL_KINDS}")
        if self.offset_class_weight not in ("none", "balanced"):
            raise ConfigError("train.offset_class_weight must be 'none' or 'balanced'")
        for name in ("total_iters", "batch_labeled", "batch_unlabeled", "hidden_width", "eval_interval"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be positive")
        if self.lr <= 0 or self.unlabeled_weight < 0:
            raise ConfigError("train.lr must be positive and train.unlabeled_weight non-negative")
        if not 0 <= self.ema_decay <= 1 or not 0 <= self.tau <= 1:
            raise ConfigError("train.ema_decay and train.tau must lie in [0, 1]")
        if self.weak_sd < 0 or self.strong_sd < 0 or not 0 <= self.drop_prob < 1:
            raise ConfigError("invalid augmentation settings")
        try:
            self.threshold_cfg
            if self.method == "seval":
                self.curriculum_cfg
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from exc

    @property
    def curriculum_cfg(self):
        return CurriculumConfig(self.curriculum_L, self.eta_pi, self.eta_tau, self.total_iters)

    @property
    def threshold_cfg(self):
        return ThresholdFitConfig(self.target_t, self.group_size, self.e1, self.e2, self.pi_floor_rule)

    @property
    def offset_cfg(self):
        return OffsetFitConfig()


REQUIRED = {
    "data": ("generator", "n_classes", "n1", "m1", "gamma_l", "gamma_u"),
    "train": ("method", "total_iters", "seed"),
}


def _build(cls, section, values):
    if not isinstance(values, dict):
        raise ConfigError(f"config section '{section}' must be a table/object")
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"unknown config field '{section}.{key}'")
    for key in REQUIRED[section]:
        if key not in values:
            raise ConfigError(f"missing required config field '{section}.{key}'")
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{section}' section: {exc}") from exc


def parse_config(data, overrides=None):
    """Build ``(SynthSpec, TrainConfig)`` from a mapping; ``overrides`` maps "section.field" to values."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    for section in REQUIRED:
        if section not in data:
            raise ConfigError(f"missing required config field '{section}'")
    extra = set(data) - set(REQUIRED)
    if extra:
        raise ConfigError(f"unknown config field '{sorted(extra)[0]}'")
    data = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}
    for dotted, value in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        data[section][key] = value
    return _build(SynthSpec, "data", data["data"]), _build(TrainConfig, "train", data["train"])


def load_config(path, overrides=None):
    path = Path(path)
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        else:
            data = json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data, overrides)


def resolved_dict(spec, cfg):
    return {"data": asdict(spec), "train": asdict(cfg)}


def config_hash(spec, cfg):
    """Short hash of the resolved config with the training seed left out."""
    resolved = resolved_dict(spec, cfg)
    resolved["train"].pop("seed")
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]
