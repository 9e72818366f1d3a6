#!/usr/bin/env python3
"""
utils.py - Part of equistream

Utility functions for equistream: environment overrides, rotating log setup
and number formatting shared by the report writers.
"""
import os
import logging
import logging.handlers
import datetime
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from dotenv import load_dotenv

# Load environment variables from .env file if it exists
env_path = Path('.env')
if env_path.exists():
    load_dotenv(env_path)

logger = logging.getLogger("equistream.utils")

FLOAT_DIGITS = 12


def get_env_var(name: str, default: Optional[str] = None) -> Optional[str]:
    """Get an environment variable, with fallback to default value"""
    return os.environ.get(name, default)


def get_environment_config() -> Dict[str, Any]:
    """Get the EQUISTREAM_* overrides with defaults

    Returns:
        dict: Environment configuration
    """
    port = get_env_var("EQUISTREAM_METRICS_PORT")
    return {
        "CONFIG": get_env_var("EQUISTREAM_CONFIG"),
        "LOG_LEVEL": get_env_var("EQUISTREAM_LOG_LEVEL", "WARNING").upper(),
        "METRICS_PORT": int(port) if port else None,
    }


def parse_log_level(name: Any, default: int = logging.WARNING) -> int:
    """Map a level name such as "debug" to its logging constant"""
    level = logging.getLevelName(str(name).upper())
    if isinstance(level, int):
        return level
    logger.warning(f"Unknown log level {name!r}, using {logging.getLevelName(default)}")
    return default


def setup_rotating_logs(app_name: str = "equistream", log_dir: str = "logs", log_level: int = logging.WARNING,
                        max_bytes: int = 10485760, backup_count: int = 5) -> str:
    """Set up rotating logs to prevent large log files

    Args:
        app_name: Name of the application for the log file
        log_dir: Directory to store logs
        log_level: Log level (default: WARNING)
        max_bytes: Maximum size in bytes before rotating (default: 10MB)
        backup_count: Number of backup files to keep (default: 5)

    Returns:
        str: Path to the log file
    """
    log_path = Path(log_dir)
    log_path.mkdir(parents=True, exist_ok=True)

    today = datetime.datetime.now().strftime("%Y%m%d")
    log_file = log_path / f"{app_name}-{today}.log"

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Remove existing handlers to avoid duplicates
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    file_handler = logging.handlers.RotatingFileHandler(
        log_file, maxBytes=max_bytes, backupCount=backup_count)

    # Reports go to stdout, so log lines stay on stderr
    console_handler = logging.StreamHandler()

    file_handler.setLevel(log_level)
    console_handler.setLevel(log_level)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    file_handler.setFormatter(formatter)
    console_handler.setFormatter(formatter)

    root_logger.addHandler(file_handler)
    root_logger.addHandler(console_handler)

    logging.info(f"Logging initialized with rotating logs in {log_file}")
    return str(log_file)


def format_float(x: Any) -> float:
    """Round to FLOAT_DIGITS significant digits so reports are byte-stable"""
    return float(f"{float(x):.{FLOAT_DIGITS}g}")


def render_value(value: Any) -> Any:
    """Make a report value JSON-ready.

    Fractions print as "p/q" and floats become {"value": ..., "approx": true};
    ints, strings and booleans pass through. Containers are walked.
    """
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): render_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [render_value(v) for v in value]
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    if isinstance(value, (float, np.floating)):
        return {"value": format_float(value), "approx": True}
    if isinstance(value, np.integer):
        return int(value)
    return str(value)
