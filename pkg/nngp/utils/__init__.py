"""Utility modules for the NNGP toolkit."""

from .logger import (
    setup_logger,
    set_level,
    get_kernel_logger,
    get_regression_logger,
    get_simulation_logger,
    get_cli_logger,
    RunLogger,
)
from .rng import stream, derive_seed, check_seed
from .files import atomic_write_text, write_csv, format_float, sibling_path

__all__ = [
    "setup_logger",
    "set_level",
    "get_kernel_logger",
    "get_regression_logger",
    "get_simulation_logger",
    "get_cli_logger",
    "RunLogger",
    "stream",
    "derive_seed",
    "check_seed",
    "atomic_write_text",
    "write_csv",
    "format_float",
    "sibling_path",
]
