#!/usr/bin/env python3
"""
config.py - Part of equistream

Configuration module for equistream
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Optional, Union

logger = logging.getLogger("equistream.config")


class Config:
    """Configuration handler for equistream"""

    DEFAULT_CONFIG = {
        "evaluation": {
            "mean_horizons": [1, 10, 100, 1000],
            "delta_grid": [4, 20],
            "grid_tail": 8,
            "truncation_tolerance": 1e-6,
            "identity_tolerance": 1e-9,
            "estimate_horizon": 1 << 20,
            "kmax": 4
        },
        "orderings": {
            "oracle_periods": 50,
            "oracle_kmax": 12
        },
        "harness": {
            "corpus_size": 500,
            "trials": 200,
            "search_budget": 10000,
            "continuity_k": 64,
            "consistency_window": 64,
            "offset_periods": [32, 40],
            "fsrc_kmax": 4,
            "max_index": 8,
            "periodic_reading": "pure",
            "workers": 1
        },
        "generator": {
            "max_head": 4,
            "max_cycle": 6,
            "low": -3,
            "high": 3
        },
        "monitoring": {
            "metrics_port": None
        },
        "paths": {
            "logs_dir": "logs"
        }
    }


    def __init__(self, config_path: Optional[Union[str, Path]] = None) -> None:
        """Start from the defaults and overlay a JSON file.

        Without config_path, config.json in the working directory is used when
        it exists. Nothing is written to disk here.
        """
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        self.config_path = Path(config_path) if config_path else Path("config.json")

        if config_path or self.config_path.exists():
            self.load_config()
        else:
            logger.info("No config file found, using default configuration")

        logger.info("Configuration initialized")

    def get(self, section: str, key: Optional[str] = None, default: Any = None) -> Any:
        """Get a whole section, or one key of it"""
        values = self.config.get(section)
        if values is None:
            return default
        if key is None:
            return values
        return values.get(key, default)

    def set(self, section: str, key: str, value: Any) -> bool:
        self.config.setdefault(section, {})[key] = value
        return True

    def _check_value(self, section: str, key: str, value: Any) -> bool:
        """Loaded values must have the type of their default; None defaults accept anything"""
        default = self.DEFAULT_CONFIG.get(section, {}).get(key)
        if default is None or value is None:
            return True
        if isinstance(default, bool) or isinstance(value, bool):
            return isinstance(default, bool) and isinstance(value, bool)
        if isinstance(default, float):
            return isinstance(value, (int, float))
        return isinstance(value, type(default))

    def load_config(self) -> bool:
        """Merge a JSON file over the current values, key by key.

        Unknown sections and keys are kept but logged; values of the wrong type
        are skipped so the default stays in force.

        Returns:
            bool: True if the file was read
        """
        if not self.config_path.exists():
            logger.warning(f"Config file {self.config_path} not found, using defaults")
            return False
        try:
            with open(self.config_path, 'r') as f:
                loaded_config = json.load(f)
        except (OSError, ValueError) as e:
            logger.error(f"Error loading configuration from {self.config_path}: {e}")
            return False
        if not isinstance(loaded_config, dict):
            logger.error(f"Error loading configuration from {self.config_path}: expected a JSON object")
            return False

        for section, values in loaded_config.items():
            if section not in self.DEFAULT_CONFIG:
                logger.warning(f"Unknown config section {section!r} in {self.config_path}")
            if not isinstance(values, dict):
                logger.warning(f"Config section {section!r} is not an object, ignored")
                continue
            for key, value in values.items():
                if not self._check_value(section, key, value):
                    logger.warning(f"Config value {section}.{key}={value!r} has the wrong type, keeping the default")
                    continue
                self.set(section, key, value)

        logger.info(f"Configuration loaded from {self.config_path}")
        return True

    def save_config(self, path: Optional[Union[str, Path]] = None) -> bool:
        """Write the current values as JSON to path (default: the file they were loaded from)"""
        target = Path(path) if path else self.config_path
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, 'w') as f:
                json.dump(self.config, f, indent=2)
            logger.info(f"Configuration saved to {target}")
            return True
        except OSError as e:
            logger.error(f"Error saving configuration: {e}")
            return False
