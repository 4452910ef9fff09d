"""Configuração central de logging do codec."""
from __future__ import annotations

import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

LOGGER_NAME = "smap_codec"
LOG_DIR = Path("logs")


def setup_logger(
    name: str = LOGGER_NAME,
    log_dir: Path | None = LOG_DIR,
    level: int = logging.INFO,
) -> logging.Logger:
    """Cria e retorna logger com saída em arquivo e console.

    Com `log_dir=None` apenas o console é usado.
    """
    logger = logging.getLogger(name)
    if logger.handlers:
        return logger

    logger.setLevel(level)
    formatter = logging.Formatter(
        "%(asctime)s | %(levelname)s | %(name)s | %(message)s",
        "%Y-%m-%d %H:%M:%S",
    )

    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_dir / "smap.log",
            maxBytes=5_000_000,
            backupCount=5,
            encoding="utf-8",
        )
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)
    logger.propagate = False
    return logger


def get_logger(module: str) -> logging.Logger:
    """Logger filho; herda os handlers de `setup_logger`."""
    return logging.getLogger(f"{LOGGER_NAME}.{module}")
