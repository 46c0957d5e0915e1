"""File helpers: atomic writes and numeric CSV formatting."""

import os
import tempfile
from pathlib import Path
from typing import Union

import pandas as pd

from ..config import get_settings

PathLike = Union[str, Path]


def float_format() -> str:
    """printf-style float format giving lossless round trips."""
    return f"%.{get_settings().csv_digits}g"


def format_float(value: float) -> str:
    """Format one number the way CSV payloads are written."""
    return float_format() % value


def atomic_write_text(path: PathLike, text: str) -> Path:
    """
    Write text to a temporary sibling file, then rename it over ``path``.

    Args:
        path: Destination file
        text: Full file contents

    Returns:
        The destination path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_csv(df: pd.DataFrame, path: PathLike) -> Path:
    """Write a numeric DataFrame atomically with lossless float formatting."""
    text = df.to_csv(index=False, float_format=float_format(), lineterminator="\n")
    return atomic_write_text(path, text)


def sibling_path(path: PathLike, suffix: str) -> Path:
    """``out/K.csv`` + ``_mean`` -> ``out/K_mean.csv``."""
    path = Path(path)
    return path.with_name(f"{path.stem}{suffix}{path.suffix or '.csv'}")
