"""Pytest configuration and fixtures for treealign tests."""

import logging
from collections.abc import Generator

import numpy as np
import pytest

from treealign.log import LOGGER_NAME
from treealign.tree import Tree

# Node ids of the seven-node example tree
R, X1, X2, X3, X4, X5, X6 = range(7)
# Edge lengths w_e of the example tree, keyed by child node
FIG_LENGTHS = {X1: 1.0, X2: 2.0, X3: 3.0, X4: 0.5, X5: 1.5, X6: 2.5}


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator; every test gets a fresh copy."""
    return np.random.default_rng(20240601)


@pytest.fixture
def example_tree() -> Tree:
    """Root r with children x1, x2, x3; x4 below x1; x5 and x6 below x2."""
    parents = [-1, R, R, R, X1, X2, X2]
    lengths = [0.0] + [FIG_LENGTHS[v] for v in range(1, 7)]
    return Tree(parents, lengths)


@pytest.fixture
def rerooting_tree() -> Tree:
    """Twelve-node tree z0..z11 used for re-rooting and common-ancestor checks."""
    parents = [-1, 0, 1, 1, 2, 0, 5, 4, 2, 2, 4, 10]
    lengths = [0.0, 1.0, 2.0, 1.5, 1.0, 2.5, 1.0, 0.5, 2.0, 3.0, 1.0, 0.75]
    return Tree(parents, lengths)


class RecordingHandler(logging.Handler):
    """Keeps every formatted message of the package logger."""

    def __init__(self) -> None:
        super().__init__()
        self.messages: list[str] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.messages.append(record.getMessage())


@pytest.fixture
def log_records() -> Generator[RecordingHandler, None, None]:
    """Capture package log messages (the package logger does not propagate)."""
    logger = logging.getLogger(LOGGER_NAME)
    handler = RecordingHandler()
    old_level = logger.level
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG)
    yield handler
    logger.removeHandler(handler)
    logger.setLevel(old_level)


@pytest.fixture(autouse=True)
def restore_package_logger() -> Generator[None, None, None]:
    """Undo configure_logging calls made by CLI tests."""
    logger = logging.getLogger(LOGGER_NAME)
    handlers = list(logger.handlers)
    level, propagate = logger.level, logger.propagate
    yield
    logger.handlers = handlers
    logger.setLevel(level)
    logger.propagate = propagate
