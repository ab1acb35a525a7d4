import logging
from pathlib import Path

from colorlog import ColoredFormatter
from rich.console import Console
from rich.logging import RichHandler

from ..config.schema import LabConfig, LogStyle

LOG_FILE = "hardylab.log"
COLOR_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(thin)s%(asctime)s%(reset)s %(blue)s%(name)s%(reset)s: %(message)s"
FILE_FORMAT = "%(asctime)s %(levelname)-8s %(name)s [%(threadName)s]: %(message)s"
LOG_COLORS = {
    "DEBUG": "cyan",
    "INFO": "green",
    "WARNING": "yellow",
    "ERROR": "red",
    "CRITICAL": "red,bg_white",
}


def _console_handler(config: LabConfig, console: Console | None) -> logging.Handler:
    if config.log_style == LogStyle.RICH:
        handler = RichHandler(console=console or Console(stderr=True), rich_tracebacks=True, show_path=False)
        handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    else:
        # sweep workers log from threads; the name column tells the stages apart
        handler = logging.StreamHandler()
        handler.setFormatter(ColoredFormatter(COLOR_FORMAT, datefmt="%H:%M:%S", log_colors=LOG_COLORS))
    handler.setLevel(config.log_level.value)
    return handler


def setup_logging(config: LabConfig, out_dir: str | Path | None = None, console: Console | None = None) -> logging.Logger:
    """Install console logging and, with ``out_dir``, a DEBUG file log there."""
    logger = logging.getLogger("hardylab")
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    logger.addHandler(_console_handler(config, console))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(out_dir / LOG_FILE, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
        logger.addHandler(file_handler)

    return logger
