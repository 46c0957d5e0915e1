"""Logging utilities for the NNGP toolkit."""

import logging
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional


def setup_logger(
    name: str = "nngp",
    level: int = logging.INFO,
    log_file: Optional[str] = None,
) -> logging.Logger:
    """
    Set up a logger with console and optional file output.

    Console output goes to stderr; stdout is reserved for command summaries.

    Args:
        name: Logger name
        level: Logging level
        log_file: Optional file path for logging

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # Prevent duplicate handlers
    if logger.handlers:
        return logger

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_format = logging.Formatter(
        "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )
    console_handler.setFormatter(console_format)
    logger.addHandler(console_handler)

    if log_file:
        logger.addHandler(_file_handler(log_file, level))

    return logger


def _file_handler(log_file: str, level: int) -> logging.FileHandler:
    log_path = Path(log_file)
    log_path.parent.mkdir(parents=True, exist_ok=True)

    file_handler = logging.FileHandler(log_file)
    file_handler.setLevel(level)
    file_format = logging.Formatter(
        "%(asctime)s | %(levelname)-8s | %(name)s | %(funcName)s:%(lineno)d | %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    )
    file_handler.setFormatter(file_format)
    return file_handler


def set_level(level: str, log_file: Optional[str] = None) -> None:
    """Apply a level (and optional file) to every nngp logger."""
    numeric = getattr(logging, level.upper(), logging.INFO)
    root = setup_logger("nngp", numeric)
    root.setLevel(numeric)
    for handler in root.handlers:
        handler.setLevel(numeric)
    if log_file and not any(isinstance(h, logging.FileHandler) for h in root.handlers):
        root.addHandler(_file_handler(log_file, numeric))
    for name in ("nngp.kernel", "nngp.regression", "nngp.simulation", "nngp.cli"):
        logging.getLogger(name).setLevel(numeric)


# Pre-configured loggers for the subpackages. Children propagate to "nngp".
def _child_logger(name: str) -> logging.Logger:
    setup_logger("nngp", logging.INFO)
    return logging.getLogger(name)


def get_kernel_logger() -> logging.Logger:
    """Get logger for kernel and expectation computations."""
    return _child_logger("nngp.kernel")


def get_regression_logger() -> logging.Logger:
    """Get logger for regression and hyperparameter search."""
    return _child_logger("nngp.regression")


def get_simulation_logger() -> logging.Logger:
    """Get logger for finite-width and Barron simulations."""
    return _child_logger("nngp.simulation")


def get_cli_logger() -> logging.Logger:
    """Get logger for the command-line interface."""
    return _child_logger("nngp.cli")


class RunLogger:
    """Journal of experiment outcomes, one line per command run."""

    def __init__(self, log_dir: str = "logs/runs"):
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = self.log_dir / f"runs_{datetime.now().strftime('%Y%m%d')}.log"
        self.logger = logging.getLogger("nngp.runs")
        self.logger.setLevel(logging.INFO)
        # Journal lines stay out of the console stream.
        self.logger.propagate = False

        # One file handler, pointing at the current journal.
        target = os.path.abspath(self.log_file)
        for handler in list(self.logger.handlers):
            if getattr(handler, "baseFilename", None) != target:
                self.logger.removeHandler(handler)
                handler.close()
        if not self.logger.handlers:
            self.logger.addHandler(_file_handler(str(self.log_file), logging.INFO))

    def log_run(
        self,
        command: str,
        seed: Optional[int],
        verdict: str,
        summary: dict,
    ):
        """Log a finished command with its headline numbers."""
        numbers = " | ".join(f"{k}: {v}" for k, v in summary.items())
        self.logger.info(
            f"{command.upper()} | seed: {seed} | verdict: {verdict} | {numbers}"
        )
