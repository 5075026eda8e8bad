"""
Configuration Utility Module

This module provides functions for loading and accessing runtime configuration.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

# Default configuration file path
CONFIG_FILE_PATH = os.getenv("CONFIG_FILE_PATH", "config.yaml")

# Cached configuration
_config_cache: Optional[Dict[str, Any]] = None


def load_yaml_config() -> Dict[str, Any]:
    """
    Load configuration from YAML file.

    Returns:
        Dict[str, Any]: Configuration dictionary from YAML file or empty dict if file not found.
    """
    try:
        config_path = Path(os.getenv("CONFIG_FILE_PATH", CONFIG_FILE_PATH))
        if config_path.exists():
            with open(config_path, "r") as f:
                return yaml.safe_load(f) or {}
        else:
            logging.warning(f"Configuration file not found: {config_path}")
            return {}
    except Exception as e:
        logging.error(f"Error loading configuration file: {e}")
        return {}


def _env_int(name: str, fallback: int) -> int:
    """Read a positive integer environment override, ignoring malformed values."""
    raw = os.getenv(name)
    if not raw:
        return fallback
    try:
        value = int(raw)
    except ValueError:
        logging.warning(f"Ignoring non-integer {name}={raw!r}")
        return fallback
    return max(1, value)


def get_config() -> Dict[str, Any]:
    """
    Get the runtime configuration from YAML file and environment variables.
    Environment variables take precedence over the file.

    Configuration is cached after first load.

    Returns:
        Dict[str, Any]: A dictionary containing the runtime configuration.
    """
    global _config_cache
    if _config_cache is not None:
        return _config_cache

    yaml_config = load_yaml_config()

    logging_config = yaml_config.get("logging", {}) or {}
    runtime_config = yaml_config.get("runtime", {}) or {}
    output_config = yaml_config.get("output", {}) or {}

    config = {
        # Logging
        "log_level": str(logging_config.get("log_level", "INFO")),
        "log_file": logging_config.get("log_file") or os.getenv("MFG_MASTER_LOG_FILE", ""),

        # Runtime (threads may be overridden per process)
        "threads": _env_int("MFG_SPLIT_THREADS", int(runtime_config.get("threads", 1))),
        "cache_limit": int(runtime_config.get("cache_limit", 20000)),
        "evaluation_budget": int(runtime_config.get("evaluation_budget", 200000)),
        "residual_max_cells": int(runtime_config.get("residual_max_cells", 32)),

        # Output
        "output_directory": output_config.get("directory", "runs"),
    }

    _config_cache = config
    return config


def get_config_value(key: str, default: Optional[Any] = None) -> Any:
    """
    Get a specific configuration value.

    Args:
        key (str): The configuration key to retrieve.
        default (Optional[Any], optional): The default value if the key is not found. Defaults to None.

    Returns:
        Any: The configuration value.
    """
    config = get_config()
    return config.get(key, default)
