"""
Structured logging utility for maskbuy.

Provides JSON-line logging with rotation and structured fields.
"""

import json
import logging
import logging.handlers
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

# Structured fields copied from a record's ``extra`` into the JSON line.
STRUCTURED_FIELDS = ("run_id", "strategy", "horizon", "seed", "round", "error_code")


def default_data_dir() -> Path:
    """Data directory from MASKBUY_DATA_DIR, or ./data."""
    return Path(os.getenv("MASKBUY_DATA_DIR", "data"))


class StructuredFormatter(logging.Formatter):
    """Formatter that outputs JSON lines."""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON."""
        log_data: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "component": record.name,
            "message": record.getMessage(),
        }

        for field in STRUCTURED_FIELDS:
            if hasattr(record, field):
                log_data[field] = getattr(record, field)

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_data, default=str)


def setup_logger(
    name: str,
    log_dir: Path,
    log_file: str,
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5,
    level: int = logging.INFO,
    console: bool = True,
) -> logging.Logger:
    """
    Set up a structured logger with file rotation.

    Args:
        name: Logger name
        log_dir: Directory for log files
        log_file: Log filename
        max_bytes: Maximum log file size before rotation
        backup_count: Number of backup files to keep
        level: Logging level
        console: Also emit JSON lines on stderr

    Returns:
        Configured logger
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    log_dir.mkdir(parents=True, exist_ok=True)
    log_path = log_dir / log_file

    file_handler = logging.handlers.RotatingFileHandler(
        log_path,
        maxBytes=max_bytes,
        backupCount=backup_count,
        encoding="utf-8",
    )
    file_handler.setFormatter(StructuredFormatter())
    logger.addHandler(file_handler)

    if console:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(StructuredFormatter())
        logger.addHandler(console_handler)

    return logger


def get_logger(
    name: str,
    data_dir: Optional[Path] = None,
    level: int = logging.INFO,
    console: bool = True,
) -> logging.Logger:
    """
    Get a logger instance for a component.

    Args:
        name: Component name (e.g., 'src', 'harness')
        data_dir: Data directory (defaults to MASKBUY_DATA_DIR env var)
        level: Logging level
        console: Also emit on stderr

    Returns:
        Logger instance
    """
    if data_dir is None:
        data_dir = default_data_dir()

    log_dir = Path(data_dir) / "logs"
    log_file = f"{name.replace('.', '-')}.log"

    return setup_logger(name, log_dir, log_file, level=level, console=console)


def log_run_event(
    logger: logging.Logger,
    level: int,
    message: str,
    run_id: Optional[str] = None,
    **kwargs,
):
    """
    Log a run-related event with structured fields.

    Args:
        logger: Logger instance
        level: Log level
        message: Log message
        run_id: Optional run identifier, e.g. "T2000-s7"
        **kwargs: Additional fields (strategy, horizon, seed, round, error_code)
    """
    extra = {}
    if run_id:
        extra["run_id"] = run_id
    extra.update({k: v for k, v in kwargs.items() if v is not None})

    logger.log(level, message, extra=extra)
