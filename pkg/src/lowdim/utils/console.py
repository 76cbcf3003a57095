"""Console and logging setup for the command-line interface."""

import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

LOGGER_NAME = "lowdim"


def make_console(stderr: bool = False) -> Console:
    return Console(stderr=stderr, highlight=False)


def setup_logging(verbose: bool = False, quiet: bool = False,
                  console: Optional[Console] = None) -> logging.Logger:
    """Attach a RichHandler to the package logger.

    Args:
        verbose: Log at DEBUG.
        quiet: Log only warnings and errors; wins over ``verbose``.
        console: Console to log to; defaults to stderr.

    Returns:
        The configured ``lowdim`` logger.
    """
    level = logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(
        console=console or make_console(stderr=True),
        show_path=verbose,
        rich_tracebacks=verbose,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    return logger
