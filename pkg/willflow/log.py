"""Package logger: rich console output plus an optional plain-text run log."""

import logging
from pathlib import Path
from typing import Optional

import pretty_errors
from rich.console import Console
from rich.logging import RichHandler

pretty_errors.configure(
    separator_character="-",
    filename_display=pretty_errors.FILENAME_COMPACT,
    line_number_first=True,
    lines_before=3,
    lines_after=1,
    truncate_code=True,
    display_locals=False,
)

LOGGER_NAME = "willflow"
RUN_LOG = "run.log"

console = Console(stderr=True)

_LEVELS = {0: logging.CRITICAL, 1: logging.INFO}


class DuplicateFilter(logging.Filter):
    """Suppresses consecutive records with the same rendered message.

    Step halving and rebalance retries repeat their warnings until the
    condition clears; only the first one of a run of repeats is emitted.
    """

    def __init__(self):
        super().__init__()
        self._previous = None

    def filter(self, record: logging.LogRecord) -> bool:
        key = (record.levelno, record.getMessage())
        if key == self._previous:
            return False
        self._previous = key
        return True


def _console_handler() -> RichHandler:
    handler = RichHandler(
        console=console,
        show_time=False,
        show_path=False,
        markup=False,
        rich_tracebacks=True,
    )
    handler.setFormatter(logging.Formatter("{message}", style="{"))
    return handler


def get_logger() -> logging.Logger:
    log = logging.getLogger(LOGGER_NAME)
    if not log.handlers:
        log.setLevel(logging.INFO)
        log.addHandler(_console_handler())
        log.addFilter(DuplicateFilter())
        log.propagate = False
    return log


logger = get_logger()


def set_verbosity_level(verbosity: int):
    """0 keeps only critical messages, 1 is INFO, 2 and more is DEBUG."""
    level = _LEVELS.get(verbosity, logging.DEBUG)
    logger.setLevel(level)
    if level == logging.DEBUG:
        fmt = logging.Formatter("{module}.{funcName}: {message}", style="{")
        for handler in logger.handlers:
            if isinstance(handler, RichHandler):
                handler.setFormatter(fmt)


def attach_run_log(directory) -> Optional[logging.FileHandler]:
    """Mirrors the records of a run into ``<directory>/run.log``.

    The file is appended to, so a resumed run continues the same log.
    Returns the handler for :func:`detach_run_log`.
    """
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path / RUN_LOG, mode="a", encoding="utf-8")
    handler.setFormatter(
        logging.Formatter("{asctime} {levelname:8s} {module}: {message}", style="{")
    )
    logger.addHandler(handler)
    return handler


def detach_run_log(handler: Optional[logging.FileHandler]):
    if handler is None:
        return
    logger.removeHandler(handler)
    handler.close()
