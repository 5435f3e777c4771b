"""Logging configuration for the enhancement toolkit."""

import json
import logging
import logging.handlers
import os
from pathlib import Path
from typing import Optional


class JsonFormatter(logging.Formatter):
    """One JSON object per log line."""

    def format(self, record):
        log_record = {
            "timestamp": self.formatTime(record, "%Y-%m-%dT%H:%M:%S%z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "pid": os.getpid(),
        }
        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)
        return json.dumps(log_record)


def resolve_level(name: Optional[str]) -> int:
    """Map a level name to its numeric value, INFO for unknown names."""
    level_name = (name or "INFO").upper()
    level = getattr(logging, level_name, None)
    return level if isinstance(level, int) else logging.INFO


def setup_logging(log_dir: Optional[str] = None, level: Optional[str] = None,
                  fmt: Optional[str] = None) -> Path:
    """Setup console and rotating file logging, returns the log directory."""
    logs_dir = Path(log_dir or os.getenv("CVEGAN_LOG_DIR", "logs"))
    logs_dir.mkdir(parents=True, exist_ok=True)

    level_name = (level or os.getenv("CVEGAN_LOG_LEVEL", "INFO")).upper()
    numeric_level = resolve_level(level_name)

    if (fmt or os.getenv("CVEGAN_LOG_FORMAT", "text")).lower() == "json":
        formatter: logging.Formatter = JsonFormatter()
    else:
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )

    root_logger = logging.getLogger()
    root_logger.setLevel(min(numeric_level, logging.DEBUG))

    for handler in list(root_logger.handlers):
        handler.close()
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(numeric_level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    file_handler = logging.handlers.RotatingFileHandler(
        logs_dir / "cvegan.log",
        maxBytes=10485760,  # 10MB
        backupCount=5
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    root_logger.addHandler(file_handler)

    error_handler = logging.handlers.RotatingFileHandler(
        logs_dir / "cvegan-errors.log",
        maxBytes=10485760,  # 10MB
        backupCount=3
    )
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(formatter)
    root_logger.addHandler(error_handler)

    # Reduce noise from some libraries
    logging.getLogger('PIL').setLevel(logging.WARNING)
    logging.getLogger('asyncio').setLevel(logging.WARNING)

    logging.info(f"Logging configured at level: {level_name}")
    return logs_dir
