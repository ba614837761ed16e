"""
Logging configuration for the ndk-svm toolkit.

This module provides centralized logging configuration that can be imported
and used across the package. Console output goes to stderr so that the
command-line tools can keep stdout for machine-readable TSV.
"""

import logging
import logging.handlers
import os
import sys
from datetime import datetime, timezone
from typing import Any, Optional, TextIO


class ColoredFormatter(logging.Formatter):
    """Custom formatter that adds colors to log levels for better readability."""

    # ANSI color codes
    COLORS = {
        'DEBUG': '\033[36m',    # Cyan
        'INFO': '\033[32m',     # Green
        'WARNING': '\033[33m',  # Yellow
        'ERROR': '\033[31m',    # Red
        'CRITICAL': '\033[35m', # Magenta
        'RESET': '\033[0m'      # Reset
    }

    def format(self, record):
        levelname = record.levelname
        if levelname in self.COLORS:
            record.levelname = f"{self.COLORS[levelname]}{levelname}{self.COLORS['RESET']}"
        try:
            return super().format(record)
        finally:
            # other handlers share the record
            record.levelname = levelname


def setup_logging(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
    max_file_size: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5,
    enable_colors: bool = True,
    stream: Optional[TextIO] = None,
) -> logging.Logger:
    """
    Set up logging for a toolkit run.

    Parameters:
    -----------
    log_level : str, optional
        The logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL). Default is INFO.
    log_file : str, optional
        Path to the log file. If None, only console logging is enabled.
    max_file_size : int, optional
        Maximum size of each log file before rotation. Default is 10MB.
    backup_count : int, optional
        Number of backup files to keep. Default is 5.
    enable_colors : bool, optional
        Whether to enable colored console output. Default is True.
    stream : TextIO, optional
        Console stream. Defaults to the current ``sys.stderr``.

    Returns:
    --------
    logging.Logger
        The configured root logger.
    """
    if log_file and os.path.dirname(log_file):
        os.makedirs(os.path.dirname(log_file), exist_ok=True)

    level = getattr(logging, log_level.upper())
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler(stream if stream is not None else sys.stderr)
    console_handler.setLevel(level)

    fmt = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    if enable_colors:
        console_formatter = ColoredFormatter(fmt, datefmt='%Y-%m-%d %H:%M:%S')
    else:
        console_formatter = logging.Formatter(fmt, datefmt='%Y-%m-%d %H:%M:%S')

    console_handler.setFormatter(console_formatter)
    root_logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=max_file_size,
            backupCount=backup_count,
            encoding='utf-8'
        )
        file_handler.setLevel(logging.DEBUG)

        file_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        file_handler.setFormatter(file_formatter)
        root_logger.addHandler(file_handler)

        error_log_file = log_file.replace('.log', '_error.log')
        error_handler = logging.handlers.RotatingFileHandler(
            error_log_file,
            maxBytes=max_file_size,
            backupCount=backup_count,
            encoding='utf-8'
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(file_formatter)
        root_logger.addHandler(error_handler)

    # numerical libraries are chatty at DEBUG
    logging.getLogger('numpy').setLevel(logging.WARNING)
    logging.getLogger('scipy').setLevel(logging.WARNING)

    return root_logger


def setup_test_logging():
    """Console-only WARNING logging for the test suite."""
    return setup_logging(
        log_level="WARNING",
        log_file=None,
        enable_colors=False
    )


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class StructuredLogger:
    """Helper class for structured logging with context."""

    def __init__(self, logger: logging.Logger):
        self.logger = logger

    def log_training(self, category: str, kernel: str, n_examples: int, n_support: int,
                     iterations: Optional[int] = None, duration_ms: Optional[float] = None):
        """Log a finished SMO training run."""
        context = {
            "category": category,
            "kernel": kernel,
            "n_examples": n_examples,
            "n_support": n_support,
            "timestamp": _utc_now(),
        }
        if iterations is not None:
            context["iterations"] = iterations
        if duration_ms is not None:
            context["duration_ms"] = duration_ms

        self.logger.info(
            f"Training completed: {category} [{kernel}] n={n_examples} m={n_support}",
            extra=context,
        )

    def log_prediction(self, path: str, n_probes: int, duration_ms: Optional[float] = None):
        """Log a batch of decisions along one prediction path."""
        context = {
            "path": path,
            "n_probes": n_probes,
            "timestamp": _utc_now(),
        }
        if duration_ms is not None:
            context["duration_ms"] = duration_ms

        self.logger.info(f"Prediction completed: {path} ({n_probes} probes)", extra=context)

    def log_error(self, operation: str, error: str, context: Optional[dict] = None):
        """Log an error with structured context."""
        error_context = {
            "operation": operation,
            "error": error,
            "timestamp": _utc_now(),
        }

        if context:
            error_context.update(context)

        self.logger.error(f"Operation failed: {operation} - {error}", extra=error_context)

    def log_run(self, command: str, config: dict[str, Any]):
        """Log the start of a command with its resolved configuration."""
        run_context = {
            "command": command,
            "run_config": config,
            "timestamp": _utc_now(),
        }
        self.logger.info(f"Run started: {command}", extra=run_context)
