"""
Configuration

Numeric tolerances, measure caps and verification defaults. A JSON file
passed with --config is merged over DEFAULT_CONFIG; anything missing or
unreadable falls back to the defaults.
"""

import copy
import json
import logging
from pathlib import Path

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "measures": {
        "lambda_tol": 1e-9,
        "lambda_max_iter": 100_000,
        "adeg_eps": 1 / 3,
        "adeg_margin": 1e-7,
    },
    "caps": {
        "materialize": 26,
        "D": 14,
        "s": 24,
        "bs": 16,
        "C": 12,
        "deg": 24,
        "lambda": 20,
        "adeg": 8,
        "unambiguous": 16,
    },
    "verification": {
        "samples": 1000,
        "seed": 0,
        "invariance_inputs": 100,
        "invariance_per_class": 500,
    },
}


def get_config_path(path=None):
    """Resolve the config file path; defaults to config.json next to the package"""
    if path is not None:
        return Path(path)
    return Path(__file__).parent.parent / "config.json"


def _merge(base, override):
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def load_config(path=None):
    """Load configuration, falling back to DEFAULT_CONFIG on any problem"""
    config = copy.deepcopy(DEFAULT_CONFIG)
    config_path = get_config_path(path)

    if not config_path.exists():
        if path is not None:
            logger.warning("Config file not found: %s (using defaults)", config_path)
        return config

    try:
        with open(config_path, "r") as f:
            user_config = json.load(f)
        if not isinstance(user_config, dict):
            raise ValueError("top-level JSON value must be an object")
        return _merge(config, user_config)
    except (OSError, ValueError) as e:
        logger.warning("Config file error in %s: %s (using defaults)", config_path, e)
        return copy.deepcopy(DEFAULT_CONFIG)
