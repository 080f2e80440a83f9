import logging
import os
import sys

from dotenv import load_dotenv

load_dotenv()

ROOT_LOGGER = "liketally"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

_handler = None


def configure_logging(level=None):
    """Attach one stderr handler to the package logger. Safe to call twice."""
    global _handler
    level = (level or os.getenv("LIKETALLY_LOG", "INFO")).upper()
    root = logging.getLogger(ROOT_LOGGER)
    if _handler is None:
        _handler = logging.StreamHandler(sys.stderr)
        _handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(_handler)
    else:
        # follow sys.stderr if it was swapped since the first call
        _handler.stream = sys.stderr
    root.setLevel(getattr(logging, level, logging.INFO))
    return root


def get_logger(name):
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")
