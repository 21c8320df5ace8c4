"""
Structured logging for CLI runs.

Records go to stderr; stdout carries command results only.
"""
import json
import logging
import os
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, Optional, Tuple

from src.settings import settings

# Attributes every LogRecord carries; anything else arrived through ``extra``.
_RECORD_FIELDS = frozenset(vars(logging.LogRecord("", 0, "", 0, "", None, None))) | {"message", "asctime"}

_QUIET_LOGGERS = ("sqlalchemy.engine", "boto3", "botocore", "urllib3")


def _extras(record: logging.LogRecord) -> Iterator[Tuple[str, Any]]:
    for key, value in record.__dict__.items():
        if key not in _RECORD_FIELDS and not key.startswith("_"):
            yield key, value


class StructuredJSONFormatter(logging.Formatter):
    """
    One JSON object per record. Context passed through ``extra={...}``
    (horizon, seed, method, file paths) becomes top-level keys.
    """

    def format(self, record: logging.LogRecord) -> str:
        entry: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        entry.update(_extras(record))
        return json.dumps(entry, default=str)


class KeyValueFormatter(logging.Formatter):
    """Human-readable lines with the ``extra`` context appended as ``key=value`` pairs."""

    def __init__(self):
        super().__init__("%(asctime)s %(levelname)-7s %(name)s: %(message)s")

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        context = " ".join(f"{key}={value}" for key, value in _extras(record))
        return f"{line} [{context}]" if context else line


def setup_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> logging.Logger:
    """
    Configure the root logger.

    Args:
        level: Level name; falls back to LOG_LEVEL
        fmt: "json" or "text"; falls back to LOG_FORMAT

    Returns:
        The root logger
    """
    level_name = (level or os.getenv("LOG_LEVEL", settings.LOG_LEVEL)).upper()
    numeric_level = getattr(logging, level_name, logging.INFO)
    use_json = (fmt or os.getenv("LOG_FORMAT", settings.LOG_FORMAT)).lower() == "json"

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(numeric_level)
    handler.setFormatter(StructuredJSONFormatter() if use_json else KeyValueFormatter())

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.setLevel(numeric_level)
    root_logger.addHandler(handler)

    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)

    return root_logger


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
