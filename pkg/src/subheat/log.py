"""Logging setup: diagnostics go to stderr with elapsed milliseconds.

Usage:
    from subheat.log import configure
    configure(verbosity=1)

Modules log through ``logging.getLogger(__name__)``; nothing here is
required for library use, only the CLI calls ``configure``.
"""

from __future__ import annotations

import logging
import time

from rich.console import Console
from rich.logging import RichHandler

_start_time = time.time()

LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}
FORMAT = "[%(elapsed_ms).0fms] %(message)s"


class ElapsedFilter(logging.Filter):
    """Stamp each record with ``elapsed_ms``, milliseconds since import."""

    def filter(self, record: logging.LogRecord) -> bool:
        record.elapsed_ms = (time.time() - _start_time) * 1000
        return True


def configure(verbosity: int = 0) -> logging.Logger:
    """Install a stderr RichHandler on the ``subheat`` logger."""
    logger = logging.getLogger("subheat")
    logger.setLevel(LEVELS.get(min(verbosity, 2), logging.DEBUG))
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = RichHandler(
        console=Console(stderr=True),
        show_time=False,
        show_path=False,
        markup=False,
    )
    handler.addFilter(ElapsedFilter())
    handler.setFormatter(logging.Formatter(FORMAT))
    logger.addHandler(handler)
    logger.propagate = False
    return logger
