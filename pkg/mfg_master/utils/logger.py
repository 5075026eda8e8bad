"""
Logger Utility Module

This module provides the package logger setup. Modules only call
``get_logger(__name__)``; handlers are attached once, by the command entry
point, to the ``mfg_master`` root logger so every module logger inherits them.
"""

import logging
import sys
from pathlib import Path
from typing import Optional

from mfg_master.utils.config import get_config_value

PACKAGE_LOGGER = "mfg_master"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def get_log_level() -> int:
    """
    Get the numeric log level named by ``logging.log_level``.

    Unknown names fall back to INFO.

    Returns:
        int: The log level.
    """
    try:
        name = str(get_config_value("log_level", "INFO")).upper()
    except Exception:
        return logging.INFO
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


def get_log_file_path() -> Optional[Path]:
    """
    Get the log file path from config, creating its directory.

    Returns:
        Optional[Path]: The log file path, or None for stderr-only logging.
    """
    log_path = get_config_value("log_file", "")
    if not log_path:
        return None
    path = Path(str(log_path)).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _attach(logger: logging.Logger, handler: logging.Handler, level: int) -> None:
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)


def setup_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Attach the configured handlers to a logger.

    Calling it again for a logger that already has handlers is a no-op.

    Args:
        name (Optional[str], optional): Logger name. Defaults to the package logger.

    Returns:
        logging.Logger: The configured logger.
    """
    logger = logging.getLogger(name or PACKAGE_LOGGER)
    if logger.handlers:
        return logger

    level = get_log_level()
    logger.setLevel(level)

    # stdout is left to command output
    _attach(logger, logging.StreamHandler(sys.stderr), level)

    try:
        log_file = get_log_file_path()
    except OSError as e:
        logger.warning(f"Log file unavailable, logging to stderr only: {e}")
        return logger
    if log_file is not None:
        _attach(logger, logging.FileHandler(log_file), level)
    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger with the specified name.

    Args:
        name (str): The name of the logger, usually ``__name__``.

    Returns:
        logging.Logger: The logger.
    """
    return logging.getLogger(name)
