"""
Logging for tiltbench.

One named logger serves the whole package. Library code only calls the
log_* helpers; the CLI decides where records go by calling setup_logger
(rotating file under the run's output directory plus a stderr console).
Until then a console-only logger at WARNING is built on first use, so
library calls and tests never create log files.
"""

from __future__ import annotations
import functools
import logging
import os
import platform
import sys
import time
from contextlib import contextmanager
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Any, Callable, Iterator, Optional

LOGGER_NAME = "tiltbench"
LOG_DIR = "logs"
LOG_FILE = "tiltbench.log"
MAX_LOG_SIZE = 5 * 1024 * 1024
BACKUP_COUNT = 3

FILE_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s:%(funcName)s:%(lineno)d | %(message)s"
CONSOLE_FORMAT = "%(asctime)s | %(levelname)-8s | %(message)s"

# Versions that change numeric results; logged once per CLI run
NUMERIC_PACKAGES = ("numpy", "scipy", "pandas")
THREAD_ENV_VARS = ("TILTBENCH_THREADS", "OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")

_logger: Optional[logging.Logger] = None


def _file_handler(log_dir: str, level: int) -> Optional[logging.Handler]:
    try:
        os.makedirs(log_dir, exist_ok=True)
        handler = RotatingFileHandler(
            os.path.join(log_dir, LOG_FILE),
            maxBytes=MAX_LOG_SIZE,
            backupCount=BACKUP_COUNT,
            encoding="utf-8",
        )
    except OSError as e:
        print(f"Warning: file logging disabled ({e})", file=sys.stderr)
        return None
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
    return handler


def _console_handler(level: int) -> logging.Handler:
    # stdout carries command results; diagnostics go to stderr
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt="%H:%M:%S"))
    return handler


def setup_logger(
    name: str = LOGGER_NAME,
    log_level: int = logging.DEBUG,
    console_level: int = logging.INFO,
    log_to_file: bool = True,
    log_to_console: bool = True,
    log_dir: str = LOG_DIR,
) -> logging.Logger:
    """
    (Re)configure the package logger.

    Handlers from an earlier call are closed and replaced, so each CLI run
    in one process writes to its own output directory.

    Args:
        name: logger name
        log_level: threshold of the logger and its file handler
        console_level: threshold of the stderr handler
        log_to_file: attach a rotating file handler in log_dir
        log_to_console: attach the stderr handler
        log_dir: directory for LOG_FILE
    """
    global _logger

    logger = logging.getLogger(name)
    logger.setLevel(log_level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    file_handler = _file_handler(log_dir, log_level) if log_to_file else None
    if file_handler is not None:
        logger.addHandler(file_handler)
    if log_to_console:
        logger.addHandler(_console_handler(console_level))
    logger.propagate = False
    _logger = logger

    if file_handler is not None:
        logger.info("=" * 60)
        logger.info(f"tiltbench run started {datetime.now():%Y-%m-%d %H:%M:%S}")
        logger.info("=" * 60)
    return logger


def get_logger() -> logging.Logger:
    global _logger
    if _logger is None:
        _logger = setup_logger(log_to_file=False, console_level=logging.WARNING)
    return _logger


def log_debug(message: str) -> None:
    get_logger().debug(message)


def log_info(message: str) -> None:
    get_logger().info(message)


def log_warning(message: str) -> None:
    get_logger().warning(message)


def log_error(message: str) -> None:
    get_logger().error(message)


def log_exception(exc: Exception, context: str = "") -> None:
    """ERROR line naming the exception; the traceback goes to DEBUG."""
    logger = get_logger()
    where = f" in {context}" if context else ""
    logger.error(f"{type(exc).__name__}{where}: {exc}")
    logger.debug("traceback:", exc_info=exc)


def log_system_info() -> None:
    """Platform, interpreter, numeric package versions and thread settings."""
    import importlib

    logger = get_logger()
    logger.info(f"platform: {platform.system()} {platform.release()} ({platform.machine()}), "
                f"{os.cpu_count()} CPUs")
    logger.info(f"python: {sys.version.split()[0]}")
    for pkg in NUMERIC_PACKAGES:
        try:
            version = getattr(importlib.import_module(pkg), "__version__", "unknown")
        except ImportError:
            logger.warning(f"{pkg}: not installed")
            continue
        logger.info(f"{pkg}: {version}")
    threads = {var: os.environ[var] for var in THREAD_ENV_VARS if var in os.environ}
    if threads:
        logger.info("thread settings: " + ", ".join(f"{k}={v}" for k, v in threads.items()))


def _format_elapsed(seconds: float) -> str:
    return f"{seconds * 1000:.1f}ms" if seconds < 1 else f"{seconds:.2f}s"


@contextmanager
def log_timing(operation: str, level: int = logging.DEBUG) -> Iterator[None]:
    """
    Log how long the enclosed block took.

        with log_timing("exponentiated gradient"):
            fit = exponentiated_gradient(data, eta1, fm)
    """
    logger = get_logger()
    start = time.perf_counter()
    logger.log(level, f"start: {operation}")
    try:
        yield
    finally:
        logger.log(level, f"done: {operation} ({_format_elapsed(time.perf_counter() - start)})")


def timed(func: Callable) -> Callable:
    """Decorator: DEBUG line with the call's duration, ERROR line if it raises."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> Any:
        start = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            log_error(f"{func.__name__} failed after {_format_elapsed(time.perf_counter() - start)}: {e}")
            raise
        log_debug(f"{func.__name__} took {_format_elapsed(time.perf_counter() - start)}")
        return result
    return wrapper
