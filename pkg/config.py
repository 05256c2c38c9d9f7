#!/usr/bin/env python3
"""
Configuration settings for the ice-layer graph network experiments
"""

import os
from pathlib import Path

import yaml
from dotenv import load_dotenv

from errors import ConfigError


class Config:
    """Configuration class for dataset, model and training settings"""

    # Flat config-file keys and the section each one lives in
    KEY_SECTIONS = {
        "records": "PATHS",
        "mar": "PATHS",
        "samples": "PATHS",
        "output_dir": "PATHS",
        "edge_mode": "GRAPH",
        "edge_cap": "GRAPH",
        "n_traces": "DATA",
        "min_layers": "DATA",
        "acquisition_year": "DATA",
        "cell_kind": "MODEL",
        "hidden": "MODEL",
        "head": "MODEL",
        "dropout_p": "MODEL",
        "feature_mask": "MODEL",
        "fanout": "MODEL",
        "weighted_mean": "MODEL",
        "bias": "MODEL",
        "epochs": "TRAIN",
        "lr": "TRAIN",
        "lr_period": "TRAIN",
        "lr_gamma": "TRAIN",
        "weight_decay": "TRAIN",
        "decoupled_weight_decay": "TRAIN",
        "seed": "TRAIN",
        "shuffle": "TRAIN",
        "n_trials": "TRAIN",
        "log_every": "TRAIN",
        "log_level": "SYSTEM",
        "bit_exact": "SYSTEM",
        "workers": "SYSTEM",
        "progress": "SYSTEM",
    }

    # Environment variables and the flat key each one overrides
    ENV_KEYS = {
        "ICEGNN_LOG_LEVEL": ("log_level", str),
        "ICEGNN_OUTPUT_DIR": ("output_dir", str),
        "ICEGNN_WORKERS": ("workers", int),
    }

    def __init__(self):
        load_dotenv()

        # Project paths
        self.PROJECT_ROOT = Path(__file__).parent
        self.LOGS_DIR = Path(os.getenv("ICEGNN_LOGS_DIR", self.PROJECT_ROOT / "logs"))

        self.PATHS_CONFIG = {
            "records": None,
            "mar": None,
            "samples": None,
            "output_dir": str(self.PROJECT_ROOT / "runs"),
        }

        # Graph construction
        self.GRAPH_CONFIG = {
            "edge_mode": "as-written",  # "as-written" or "sqrt"
            "edge_cap": 1e9,
        }

        # Record filtering and sample building
        self.DATA_CONFIG = {
            "n_traces": 256,
            "min_layers": 20,
            "acquisition_year": 2012,
        }

        # Network layout
        self.MODEL_CONFIG = {
            "cell_kind": "sage",  # "sage" or "gcn"
            "hidden": 256,
            "head": [128, 64],
            "dropout_p": 0.2,
            "feature_mask": "all",
            "fanout": "all",
            "weighted_mean": False,
            "bias": True,
        }

        # Optimization protocol
        self.TRAIN_CONFIG = {
            "epochs": None,  # None: 450 for SAGE cells, 300 for GCN cells
            "lr": 0.01,
            "lr_period": 75,
            "lr_gamma": 0.5,
            "weight_decay": 0.0001,
            "decoupled_weight_decay": False,
            "seed": 0,
            "shuffle": True,
            "n_trials": 5,
            "log_every": 25,
        }

        self.SYSTEM_CONFIG = {
            "log_level": "INFO",
            "bit_exact": True,
            "workers": 1,
            "progress": True,
        }
        self.apply_environment()

    @classmethod
    def from_file(cls, path):
        """Build a Config from a flat YAML file; unknown keys are rejected"""
        config = cls()
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed config file {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a flat key/value mapping")
        config.apply_overrides(data)
        config.apply_environment()
        return config

    def apply_environment(self):
        """Re-apply ICEGNN_* variables so they win over config-file values"""
        for var, (key, convert) in self.ENV_KEYS.items():
            value = os.getenv(var)
            if value is None:
                continue
            try:
                self.apply_overrides({key: convert(value)})
            except ValueError as e:
                raise ConfigError(f"{var}={value!r} is not a valid {key}") from e

    def apply_overrides(self, values):
        """Apply flat key/value overrides; None values are skipped"""
        for key, value in values.items():
            if value is None:
                continue
            section = self.KEY_SECTIONS.get(key)
            if section is None:
                raise ConfigError(f"unknown config key '{key}'")
            self.update_config(section, key, value)

    def get_paths_config(self):
        """Get input/output paths"""
        return self.PATHS_CONFIG

    def get_graph_config(self):
        """Get graph construction settings"""
        return self.GRAPH_CONFIG

    def get_data_config(self):
        """Get dataset settings"""
        return self.DATA_CONFIG

    def get_model_config(self):
        """Get model settings"""
        return self.MODEL_CONFIG

    def get_train_config(self):
        """Get training settings"""
        return self.TRAIN_CONFIG

    def get_system_config(self):
        """Get logging and execution settings"""
        return self.SYSTEM_CONFIG

    def update_config(self, section, key, value):
        """Update a configuration value"""
        if hasattr(self, section.upper() + "_CONFIG"):
            config_dict = getattr(self, section.upper() + "_CONFIG")
            if key in config_dict:
                config_dict[key] = value
                return True
        return False

    def validate_paths(self, *keys):
        """Check that the named input paths are set and exist"""
        for key in keys:
            value = self.PATHS_CONFIG.get(key)
            if not value:
                raise ConfigError(f"'{key}' path is required (set it in the config file or with --{key})")
            if not Path(value).exists():
                raise ConfigError(f"'{key}' path does not exist: {value}")

    def to_flat_dict(self):
        """Flat key/value view, the inverse of from_file"""
        flat = {}
        for key, section in self.KEY_SECTIONS.items():
            flat[key] = getattr(self, section + "_CONFIG")[key]
        return flat
