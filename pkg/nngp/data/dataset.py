"""
Numeric CSV ingestion: training sets, probe points and measure atoms.

Every payload is comma separated with a header row. Errors name the line of
the offending row (the header is line 1).
"""

from dataclasses import dataclass
import io
import math
from pathlib import Path
import re
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.utils.validation import check_array

from ..exceptions import DataError, DimensionMismatchError

PathLike = Union[str, Path]

_X_COLUMN = re.compile(r"^x(\d+)$")
_Y_COLUMN = re.compile(r"^y(\d*)$")


def _parse_cell(cell) -> float:
    """Correctly rounded float of one cell, NaN when it is not a number."""
    # pandas' C tokenizer may be 1 ulp off; %.17g text must read back bit-exact.
    if not isinstance(cell, str) or "_" in cell:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        return math.nan


def parse_numeric_csv(text: str, name: str = "CSV") -> pd.DataFrame:
    """
    Parse an all-numeric CSV payload.

    Args:
        text: File contents
        name: Label used in error messages

    Returns:
        DataFrame of float64 columns

    Raises:
        DataError: malformed row, non-numeric or non-finite value, missing header
    """
    try:
        raw = pd.read_csv(
            io.StringIO(text),
            dtype=str,
            skipinitialspace=True,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError:
        raise DataError(f"{name}: missing header row", line=1)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise DataError(f"{name}: {e}", line=int(match.group(1)) if match else None)

    raw.columns = [str(c).strip() for c in raw.columns]
    if raw.shape[1] == 0:
        raise DataError(f"{name}: header has no columns", line=1)

    values = raw.apply(lambda col: col.str.strip().map(_parse_cell)).astype(float)
    bad = values.isna().to_numpy() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        cell = raw.iat[row, col]
        raise DataError(
            f"{name}: column '{raw.columns[col]}' has non-numeric or non-finite value {cell!r}",
            line=int(row) + 2,
        )
    return values


def read_numeric_csv(path: PathLike, name: Optional[str] = None) -> pd.DataFrame:
    """Read and parse a numeric CSV file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror or e}")
    return parse_numeric_csv(text, name or str(path))


def _x_columns(columns: Sequence[str], name: str) -> List[str]:
    xs = [c for c in columns if _X_COLUMN.match(c)]
    expected = [f"x{j}" for j in range(len(xs))]
    if not xs or xs != expected:
        raise DataError(f"{name}: expected input columns x0..x{{d-1}}, got {list(columns)}", line=1)
    return xs


def _check_d_in(X: np.ndarray, d_in: Optional[int], name: str) -> None:
    if d_in is not None and X.shape[1] != d_in:
        raise DimensionMismatchError(f"{name}: {X.shape[1]} input columns, expected d_in = {d_in}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Training data: inputs X (M x d_in) and targets y (M,) or (M, d_out).

    ``source_text`` keeps the CSV the data came from, verbatim, for model files.
    """

    X: np.ndarray
    y: np.ndarray
    source_text: Optional[str] = None

    def __post_init__(self):
        X = check_array(self.X, dtype=np.float64, ensure_2d=True)
        y = check_array(self.y, dtype=np.float64, ensure_2d=False)
        if y.ndim not in (1, 2):
            raise DimensionMismatchError(f"y must be a vector or a matrix, got shape {y.shape}")
        if y.shape[0] != X.shape[0]:
            raise DimensionMismatchError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def d_in(self) -> int:
        return self.X.shape[1]

    @property
    def d_out(self) -> int:
        return 1 if self.y.ndim == 1 else self.y.shape[1]

    @property
    def targets(self) -> np.ndarray:
        """Targets as an (M, d_out) matrix."""
        return self.y.reshape(self.n_samples, -1)

    def with_targets(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.X, y)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.X, columns=[f"x{j}" for j in range(self.d_in)])
        if self.y.ndim == 1:
            df["y"] = self.y
        else:
            for k in range(self.d_out):
                df[f"y{k}"] = self.y[:, k]
        return df


def parse_dataset(text: str, d_in: Optional[int] = None, name: str = "training CSV") -> Dataset:
    """Parse a training CSV with columns x0..x{d-1} then y (or y0..y{k-1})."""
    df = parse_numeric_csv(text, name)
    xs = _x_columns(df.columns, name)
    ys = [c for c in df.columns if c not in xs]
    if not ys or not all(_Y_COLUMN.match(c) for c in ys) or list(df.columns) != xs + ys:
        raise DataError(f"{name}: expected columns x0..x{{d-1}} followed by y or y0..y{{k-1}}", line=1)
    if ys != ["y"] and ys != [f"y{k}" for k in range(len(ys))]:
        raise DataError(f"{name}: target columns must be 'y' or y0..y{{k-1}}, got {ys}", line=1)
    if df.shape[0] < 1:
        raise DataError(f"{name}: no data rows", line=2)
    X = df[xs].to_numpy()
    _check_d_in(X, d_in, name)
    y = df["y"].to_numpy() if ys == ["y"] else df[ys].to_numpy()
    return Dataset(X, y, source_text=text)


def load_dataset(path: PathLike, d_in: Optional[int] = None) -> Dataset:
    """Load a training CSV file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror or e}")
    return parse_dataset(text, d_in, str(path))


def load_points(path: PathLike, d_in: Optional[int] = None) -> np.ndarray:
    """
    Load probe points from a CSV with columns x0..x{d-1}.

    Other columns (for instance a ``y`` column of a training file) are ignored.
    """
    df = read_numeric_csv(path)
    xs = _x_columns(df.columns, str(path))
    if df.shape[0] < 1:
        raise DataError(f"{path}: no data rows", line=2)
    X = df[xs].to_numpy()
    _check_d_in(X, d_in, str(path))
    return X


def parse_atoms(text: str, d_in: int, name: str = "atoms CSV"):
    """
    Parse empirical measure atoms with columns w0..w{d-1}, b, weight.

    Returns:
        (W (n, d_in), b (n,), weights (n,))
    """
    df = parse_numeric_csv(text, name)
    expected = [f"w{j}" for j in range(d_in)] + ["b", "weight"]
    if list(df.columns) != expected:
        raise DataError(f"{name}: expected columns {','.join(expected)}, got {','.join(df.columns)}", line=1)
    if df.shape[0] < 1:
        raise DataError(f"{name}: no atoms", line=2)
    return (
        df[expected[:d_in]].to_numpy(),
        df["b"].to_numpy(),
        df["weight"].to_numpy(),
    )


def atoms_frame(W: np.ndarray, b: np.ndarray, weights: np.ndarray) -> pd.DataFrame:
    """Inverse of parse_atoms: a DataFrame ready for CSV output."""
    df = pd.DataFrame(np.asarray(W, dtype=float), columns=[f"w{j}" for j in range(np.shape(W)[1])])
    df["b"] = np.asarray(b, dtype=float)
    df["weight"] = np.asarray(weights, dtype=float)
    return df
