"""Logging setup shared by the library and the CLI."""

import logging
import sys
from typing import Optional

LOGGER_NAME = "treealign"


class ImmediateStreamHandler(logging.StreamHandler):
    """Stream handler that flushes after each emit."""

    def emit(self, record: logging.LogRecord) -> None:
        super().emit(record)
        self.flush()


def configure_logging(
    level: Optional[int] = None,
    handler: Optional[logging.Handler] = None,
) -> logging.Logger:
    """Install a single handler on the package logger.

    Args:
        level: Logging level (default: logging.INFO). Use logging.WARNING to reduce output
        handler: Custom logging handler (default: stdout with timestamp)

    Returns:
        The configured ``treealign`` logger
    """
    if handler is None:
        handler = ImmediateStreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter("%(asctime)s - %(message)s"))

    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level if level is not None else logging.INFO)
    logger.handlers = []  # Clear any existing handlers
    logger.addHandler(handler)
    logger.propagate = False  # Don't propagate to root logger
    return logger
