"""Desk-scale training simulator and its baselines."""

from .config import METHODS, ConfigError, TrainConfig, config_hash, load_config, parse_config
from .model import EMAParams, ModelSpec, forward, init_params, ssl_objective
from .train import RunRecord, train, train_arrays

__all__ = [
    "METHODS", "ConfigError", "TrainConfig", "config_hash", "load_config", "parse_config",
    "EMAParams", "ModelSpec", "forward", "init_params", "ssl_objective",
    "RunRecord", "train", "train_arrays",
]
