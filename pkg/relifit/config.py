"""
Configuration for relifit.

Defaults live in DEFAULT_CONFIG. A JSON file loaded with load_config() is
merged over them section by section, then a few environment variables are
applied on top.
"""

import copy
import json
import logging
import os

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    'fitting': {
        'p': 0.95,
        'r': 0.03,
        'phi_bounds': [1e-8, 1e-1],
        'gamma_bounds': [1.0, 50.0],
        'n_upper_factor': 10,
        'n_upper_offset': 10,
        'workers': 1,
    },
    'swarm': {
        'pop_size': 30,
        'max_iters': 1000,
        'c1': 0.5,
        'c2': 1.5,
        'w_start': 0.9,
        'w_end': 0.4,
        'g0': 100.0,
        'alpha': 20.0,
        'eps': 1e-9,
        'seed': 0,
        'vmax_frac': 0.2,
    },
    'ingest': {
        'time_unit': 'hours',
        'grouping': 'per-failure',
    },
    'output': {
        'format': 'md',
        'trace_tail': 10,
    },
    'logging': {
        'level': 'INFO',
        'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    },
}

ENV_OVERRIDES = {
    'RELIFIT_LOG_LEVEL': ('logging', 'level', str),
    'RELIFIT_WORKERS': ('fitting', 'workers', int),
    'RELIFIT_SEED': ('swarm', 'seed', int),
}

_config = None


def _merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _apply_env(config):
    for variable, (section, key, cast) in ENV_OVERRIDES.items():
        raw = os.environ.get(variable)
        if raw is None:
            continue
        try:
            config[section][key] = cast(raw)
        except ValueError:
            logger.warning(f"Ignoring {variable}={raw!r}: expected {cast.__name__}")
    return config


def get_config():
    """
    Current configuration.

    Returns:
        Configuration dictionary (defaults plus any loaded file and environment overrides)
    """
    global _config
    if _config is None:
        _config = _apply_env(copy.deepcopy(DEFAULT_CONFIG))
    return _config


def load_config(path):
    """
    Merge a JSON configuration file over the defaults.

    Args:
        path: Path to the JSON file

    Returns:
        The resulting configuration
    """
    global _config
    with open(path, 'r', encoding='utf-8') as handle:
        loaded = json.load(handle)
    unknown = sorted(set(loaded) - set(DEFAULT_CONFIG))
    if unknown:
        logger.warning(f"Unknown configuration section(s) in {path}: {', '.join(unknown)}")
    _config = _apply_env(_merge(DEFAULT_CONFIG, loaded))
    logger.info(f"Loaded configuration from {path}")
    return _config


def save_config(path):
    """
    Write the current configuration to a JSON file.

    Args:
        path: Destination path
    """
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(get_config(), handle, indent=4)
        handle.write('\n')


def reset_config():
    """Drop any loaded configuration and return to the defaults."""
    global _config
    _config = None
