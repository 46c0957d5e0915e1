"""Dataset loading."""

from .dataset import (
    Dataset,
    parse_numeric_csv,
    read_numeric_csv,
    parse_dataset,
    load_dataset,
    load_points,
    parse_atoms,
    atoms_frame,
)

__all__ = [
    "Dataset",
    "parse_numeric_csv",
    "read_numeric_csv",
    "parse_dataset",
    "load_dataset",
    "load_points",
    "parse_atoms",
    "atoms_frame",
]
