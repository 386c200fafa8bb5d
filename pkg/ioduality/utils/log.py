"""Logging helpers built on loguru"""
from typing import Iterator
from typing import List
from typing import Union

import sys
import contextlib

from loguru import logger


LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {name} - {message}"


def configure_logging(level: str = "INFO", sink=None):
    """Reset loguru to a single sink used by the command line tools

    Args:
        level: minimum level to emit
        sink: where to write. Defaults to stderr so stdout stays parseable.
    """
    logger.remove()
    logger.add(sink or sys.stderr, level=level.upper(), format=LOG_FORMAT)


@contextlib.contextmanager
def silenced(modules: Union[str, List[str]]) -> Iterator[None]:
    """Temporarily disable loguru records coming from the given modules

    Args:
        modules: module name or list of module names to silence
    """
    if isinstance(modules, str):
        modules = [modules]
    for name in modules:
        logger.disable(name)
    try:
        yield
    finally:
        for name in modules:
            logger.enable(name)
