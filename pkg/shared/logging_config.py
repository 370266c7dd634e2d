"""
Structured JSON-lines logging to standard error.

stdout is reserved for results (CSV, JSON), so every component logs
through ``get_logger`` and never prints.
"""
import json
import logging
import sys
from datetime import datetime, timezone
from typing import Dict, Optional

import numpy as np

from shared.config import Config

_ROOT = "rsf"
_loggers: Dict[str, "StructuredLogger"] = {}


def _to_json(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


class JsonLineFormatter(logging.Formatter):
    """One JSON object per record: time, component, level, event, fields"""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "component": record.name.removeprefix(f"{_ROOT}."),
            "level": record.levelname,
            "event": record.getMessage(),
        }
        entry.update(getattr(record, "fields", {}))
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry, ensure_ascii=False, default=_to_json)


def _root_logger() -> logging.Logger:
    root = logging.getLogger(_ROOT)
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(JsonLineFormatter())
        root.addHandler(handler)
        root.setLevel(getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO))
        root.propagate = False
    return root


class StructuredLogger:
    """Logs snake_case events with keyword fields.

    ``bind`` returns a logger that adds fixed context fields to every event.
    """

    def __init__(self, component: str, context: Optional[dict] = None):
        _root_logger()
        self.component = component
        self.logger = logging.getLogger(f"{_ROOT}.{component}")
        self.context = dict(context or {})

    def bind(self, **fields) -> "StructuredLogger":
        return StructuredLogger(self.component, {**self.context, **fields})

    def _log(self, level: int, event: str, fields: dict, exc_info: bool = False) -> None:
        if self.logger.isEnabledFor(level):
            self.logger.log(level, event, exc_info=exc_info, extra={"fields": {**self.context, **fields}})

    def debug(self, event: str, **fields):
        self._log(logging.DEBUG, event, fields)

    def info(self, event: str, **fields):
        self._log(logging.INFO, event, fields)

    def warning(self, event: str, **fields):
        self._log(logging.WARNING, event, fields)

    def error(self, event: str, **fields):
        self._log(logging.ERROR, event, fields)

    def exception(self, event: str, **fields):
        """Error event with the active traceback attached"""
        self._log(logging.ERROR, event, fields, exc_info=True)


def set_level(level: str) -> None:
    """Change the level of every component logger"""
    _root_logger().setLevel(getattr(logging, level.upper()))


def get_logger(component: str) -> StructuredLogger:
    if component not in _loggers:
        _loggers[component] = StructuredLogger(component)
    return _loggers[component]
