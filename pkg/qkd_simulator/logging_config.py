"""Logging configuration for the QKD simulator."""
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Union

PACKAGE_LOGGER = "qkd_simulator"
LOG_DIR_ENV = "QKD_LOG_DIR"
LOG_LEVEL_ENV = "QKD_LOG_LEVEL"

_SIMPLE_FORMAT = '%(asctime)s [%(levelname)s] %(message)s'
_DETAILED_FORMAT = '%(asctime)s - %(name)s - %(levelname)s [%(filename)s:%(lineno)d] - %(message)s'


def _default_level() -> int:
    name = os.environ.get(LOG_LEVEL_ENV, "INFO").upper()
    return getattr(logging, name, logging.INFO)


def configure_logging(name: Optional[str] = None,
                      level: Union[int, str] = logging.INFO,
                      log_file: Optional[str] = None) -> logging.Logger:
    """
    Configure a logger for one simulator component.

    Args:
        name: Logger name
        level: Logging level
        log_file: Optional file path for logging

    Returns:
        Configured logger
    """
    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir and not os.path.exists(log_dir):
            os.makedirs(log_dir)

    logger = logging.getLogger(name or PACKAGE_LOGGER)
    logger.setLevel(level)

    if logger.handlers:
        logger.handlers = []

    # stdout carries CLI reports, so the console handler writes to stderr
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter(_SIMPLE_FORMAT))
    logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(_DETAILED_FORMAT))
        logger.addHandler(file_handler)

    return logger


def get_logger(component_name: str, log_to_file: Optional[bool] = None) -> logging.Logger:
    """
    Get a logger for a specific component.

    Args:
        component_name: Name of the component (e.g. "protocols")
        log_to_file: Whether to log to a file; defaults to True when
            QKD_LOG_DIR is set

    Returns:
        Configured logger
    """
    logs_dir = os.environ.get(LOG_DIR_ENV)
    if log_to_file is None:
        log_to_file = bool(logs_dir)

    log_file = None
    if log_to_file:
        directory = Path(logs_dir) if logs_dir else Path.cwd() / "logs"
        directory.mkdir(parents=True, exist_ok=True)
        log_file = directory / f"{component_name}.log"

    return configure_logging(
        name=f"{PACKAGE_LOGGER}.{component_name}",
        level=_default_level(),
        log_file=str(log_file) if log_file else None
    )


def set_level(level: Union[int, str]) -> None:
    """Set the level of every logger created through get_logger."""
    if isinstance(level, str):
        level = getattr(logging, level.upper())
    prefix = f"{PACKAGE_LOGGER}."
    for name, logger in logging.Logger.manager.loggerDict.items():
        if name.startswith(prefix) and isinstance(logger, logging.Logger):
            logger.setLevel(level)
