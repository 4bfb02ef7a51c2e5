#!/usr/bin/env python3
"""
Runtime settings loaded from the environment (and an optional .env file)
"""

import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

from .errors import ConfigurationError

load_dotenv()

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class RuntimeSettings:
    """Process-level knobs; science parameters never live here"""

    threads: int = 1
    log_level: str = "WARNING"
    output_dir: str = "./outputs"

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        """Read PLASMOSHAPE_* variables"""
        raw_threads = os.getenv('PLASMOSHAPE_THREADS', '1')
        try:
            threads = int(raw_threads)
        except ValueError:
            raise ConfigurationError(f"PLASMOSHAPE_THREADS must be an integer, got '{raw_threads}'")
        if threads < 1:
            raise ConfigurationError(f"PLASMOSHAPE_THREADS must be >= 1, got {threads}")

        log_level = os.getenv('PLASMOSHAPE_LOG_LEVEL', 'WARNING').upper()
        if log_level not in LOG_LEVELS:
            raise ConfigurationError(
                f"PLASMOSHAPE_LOG_LEVEL '{log_level}' not recognised. Choose from: {', '.join(LOG_LEVELS)}"
            )

        output_dir = os.getenv('PLASMOSHAPE_OUTPUT_DIR', './outputs')
        return cls(threads=threads, log_level=log_level, output_dir=output_dir)


def configure_logging(settings: Optional[RuntimeSettings] = None) -> None:
    """Install a root handler at the configured level"""
    settings = settings or RuntimeSettings.from_env()
    logging.basicConfig(
        level=getattr(logging, settings.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit worker count, falling back to PLASMOSHAPE_THREADS"""
    if threads is None:
        return RuntimeSettings.from_env().threads
    if threads < 1:
        raise ConfigurationError(f"threads must be >= 1, got {threads}")
    return threads
