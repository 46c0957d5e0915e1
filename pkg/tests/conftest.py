"""Shared fixtures: isolated settings, seeded generators and spec builders."""

from pathlib import Path

import numpy as np
import pytest

from nngp.config import get_settings
from nngp.data import Dataset
from nngp.kernel import (
    ExpectationMethod,
    GaussianIID,
    KernelSpec,
    LayerHyperparams,
    parse_activation,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Keep run journals and cached settings local to each test."""
    monkeypatch.setenv("NNGP_RUN_LOG_DIR", str(tmp_path / "runs"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


def build_spec(activation="relu", depth=1, d_in=2, pi=None, hidden=None, output=None,
               method=None, seed=0, free=()):
    """
    Spec with ``depth`` identical hidden layers.

    ``hidden`` and ``output`` are dicts of LayerHyperparams fields.
    """
    hidden = {"var_w": 1.5, "var_b": 0.2, **(hidden or {})}
    output = {"var_w": 1.0, **(output or {})}
    layers = [LayerHyperparams(**hidden) for _ in range(depth - 1)] + [LayerHyperparams(**output)]
    return KernelSpec(
        depth=depth,
        d_in=d_in,
        activation=parse_activation(activation),
        pi=pi if pi is not None else GaussianIID(var_w=1.0, var_b=0.3),
        layers=tuple(layers),
        method=method or ExpectationMethod.quadrature(64),
        seed=seed,
        free=tuple(free),
    )


@pytest.fixture
def spec_factory():
    return build_spec


@pytest.fixture
def sin_data() -> Dataset:
    X = np.linspace(-2.0, 2.0, 8)[:, None]
    return Dataset(X, np.sin(1.5 * X[:, 0]))


@pytest.fixture
def relu_spec():
    return build_spec("relu", depth=1, d_in=1, pi=GaussianIID(var_w=1.0, var_b=0.5), output={"var_w": 2.0})
