"""
Logging configuration from the `logging` settings section
"""
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from ..models.errors import ConfigError
from ..models.experiment_data import LoggingSettings


def setup_logging(settings: Optional[LoggingSettings] = None, level: Optional[str] = None) -> logging.Logger:
    """Configure the root logger; `level` overrides the configured one"""
    settings = settings or LoggingSettings()
    level_name = (level or settings.level).upper()
    numeric_level = logging.getLevelName(level_name)
    if not isinstance(numeric_level, int):
        raise ConfigError(f"Unknown log level '{level_name}'")

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(settings.format)
    console = logging.StreamHandler()
    console.setFormatter(formatter)
    root.addHandler(console)

    if settings.file:
        Path(settings.file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            settings.file, maxBytes=settings.max_size, backupCount=settings.backup_count, encoding="utf-8"
        )
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

    root.setLevel(numeric_level)
    return root
