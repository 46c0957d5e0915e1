"""
Self-contained text files for trained models.

Layout::

    [spec]      flat kernel spec config
    [atoms]     atoms CSV (empirical first-layer measures only)
    [model]     noise_var, jitter_used
    [train]     training CSV, verbatim
    [beta]      coefficient CSV, 17 significant digits

Loading refactors K + (noise_var + jitter_used) I and re-checks that beta
solves the system.
"""

from pathlib import Path
import re
from typing import Dict, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy import linalg

from ..config import ACCEPTANCE_BANDS
from ..data.dataset import atoms_frame, parse_dataset, parse_numeric_csv
from ..exceptions import ModelIntegrityError
from ..kernel.measures import Empirical
from ..kernel.recursion import gram
from ..kernel.spec import EMBEDDED_ATOMS, dump_kernel_spec, parse_flat_config, parse_kernel_spec, validation_error
from ..utils.files import atomic_write_text, float_format, format_float
from ..utils.logger import get_regression_logger
from .gp import TrainedModel, centered_targets, regularized

logger = get_regression_logger()

PathLike = Union[str, Path]

SECTIONS = ("spec", "atoms", "model", "train", "beta")
_HEADER = re.compile(r"^\[(\w+)\]\s*$")


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    noise_var: float = Field(ge=0, allow_inf_nan=False)
    jitter_used: float = Field(ge=0, allow_inf_nan=False)


def _csv_text(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=float_format(), lineterminator="\n")


def _beta_frame(beta: np.ndarray) -> pd.DataFrame:
    if beta.ndim == 1:
        return pd.DataFrame({"beta": beta})
    return pd.DataFrame(beta, columns=[f"beta{k}" for k in range(beta.shape[1])])


def dump_model(model: TrainedModel) -> str:
    """Render a model file."""
    parts = ["# nngp model file", "[spec]"]
    empirical = isinstance(model.spec.pi, Empirical)
    parts.append(dump_kernel_spec(model.spec, atoms_ref=EMBEDDED_ATOMS if empirical else None).rstrip("\n"))
    if empirical:
        pi = model.spec.pi
        parts += ["[atoms]", _csv_text(atoms_frame(pi.weights_w, pi.biases, pi.probs)).rstrip("\n")]
    parts += [
        "[model]",
        f"noise_var = {format_float(model.noise_var)}",
        f"jitter_used = {format_float(model.jitter_used)}",
        "[train]",
    ]
    train = model.data.source_text
    if train is None:
        train = _csv_text(model.data.to_frame())
    parts.append(train.rstrip("\n"))
    parts += ["[beta]", _csv_text(_beta_frame(model.beta)).rstrip("\n")]
    return "\n".join(parts) + "\n"


def save_model(model: TrainedModel, path: PathLike) -> Path:
    """Write a model file atomically."""
    path = atomic_write_text(path, dump_model(model))
    logger.info(f"Saved model ({model.data.n_samples} points) to {path}")
    return path


def _split_sections(text: str) -> Dict[str, str]:
    sections: Dict[str, list] = {}
    current = None
    for line in text.splitlines():
        match = _HEADER.match(line)
        if match:
            current = match.group(1)
            if current not in SECTIONS:
                raise ModelIntegrityError(f"unknown model file section [{current}]")
            if current in sections:
                raise ModelIntegrityError(f"duplicate model file section [{current}]")
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
        elif line.strip() and not line.lstrip().startswith("#"):
            raise ModelIntegrityError("content before the first model file section")
    for name in ("spec", "model", "train", "beta"):
        if name not in sections:
            raise ModelIntegrityError(f"model file lacks the [{name}] section")
    return {name: "\n".join(lines) + "\n" for name, lines in sections.items()}


def parse_model(text: str) -> TrainedModel:
    """
    Rebuild a TrainedModel from model file text.

    Raises:
        ModelIntegrityError: missing sections, or beta does not solve the stored system
        ConfigError, DataError: malformed embedded spec or CSV
    """
    sections = _split_sections(text)
    spec = parse_kernel_spec(sections["spec"], atoms_text=sections.get("atoms"), name="[spec]")

    conf = parse_flat_config(sections["model"], "[model]")
    try:
        meta = ModelSection.model_validate(conf.values)
    except ValidationError as e:
        raise validation_error(conf, e)

    data = parse_dataset(sections["train"], spec.d_in, "[train]")
    beta_df = parse_numeric_csv(sections["beta"], "[beta]")
    beta = beta_df["beta"].to_numpy() if list(beta_df.columns) == ["beta"] else beta_df.to_numpy()
    if beta.shape != data.y.shape:
        raise ModelIntegrityError(f"beta has shape {beta.shape}, targets have shape {data.y.shape}")

    h, K = gram(spec, data.X)
    A = regularized(K, meta.noise_var, meta.jitter_used)
    try:
        chol = linalg.cholesky(A, lower=True)
    except linalg.LinAlgError:
        raise ModelIntegrityError("stored noise and jitter no longer make K positive definite")

    rhs = centered_targets(data, h)
    scale = max(float(np.linalg.norm(rhs)), float(np.linalg.norm(A) * np.linalg.norm(beta)), 1e-300)
    residual = float(np.linalg.norm(A @ beta - rhs)) / scale
    if residual > ACCEPTANCE_BANDS["beta_residual"]:
        raise ModelIntegrityError(f"beta residual {residual:.3g} exceeds {ACCEPTANCE_BANDS['beta_residual']:g}")
    return TrainedModel(spec, data, meta.noise_var, chol, beta, h, meta.jitter_used, K)


def load_model(path: PathLike) -> TrainedModel:
    """Read and verify a model file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ModelIntegrityError(f"cannot read model {path}: {e.strerror or e}")
    model = parse_model(text)
    logger.info(f"Loaded model ({model.data.n_samples} points) from {path}")
    return model
